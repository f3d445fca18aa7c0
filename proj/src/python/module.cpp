#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "iocregex/pipeline.hpp"
#include "iocregex/regex.hpp"

namespace py = pybind11;
using namespace iocregex;
using nlohmann::json;

namespace {

py::object to_py(const json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

json from_py(const py::handle& obj) {
    return json::parse(py::module_::import("json").attr("dumps")(obj).cast<std::string>());
}

/// A loaded knowledge store plus normalizer, reused across calls.
class Session {
public:
    Session(std::vector<std::filesystem::path> kb, std::vector<std::filesystem::path> tables) : kb_(std::move(kb)),
                                                                                               tables_(std::move(tables)) {
        store_ = KnowledgeStore::ingest(kb_);
        auto t = NormalizationTables::defaults();
        for (const auto& p : tables_) t.merge_file(p);
        normalizer_ = std::make_unique<Normalizer>(store_, std::move(t));
    }

    std::string classify(const std::string& ioc) const { return std::string(to_string(normalizer_->classify(ioc))); }

    py::object annotate(const std::string& ioc, bool bypass) const {
        const auto record = normalizer_->make_record(ioc);
        return to_py(annotation_to_json(bypass ? bypass_groups(record) : find_groups(record, store_)));
    }

    py::dict grade(const std::string& pattern, const std::string& ioc) const {
        const auto c = iocregex::grade(pattern, find_groups(normalizer_->make_record(ioc), store_));
        py::dict d;
        d["pattern"] = c.pattern;
        d["n_cg"] = c.n_cg;
        d["n_wc"] = c.n_wc;
        d["score"] = c.score;
        return d;
    }

    py::dict generate(const std::vector<std::string>& iocs, const std::string& mode, const std::string& backend,
                      const std::filesystem::path& replay, std::size_t candidates, std::uint64_t seed,
                      std::size_t workers) const {
        PipelineConfig config;
        config.knowledge_base = kb_;
        config.table_overrides = tables_;
        auto m = parse_ablation_mode(mode);
        if (!m) throw ConfigError("unknown mode \"" + mode + "\"");
        config.mode = *m;
        config.backend.kind = backend;
        config.backend.replay_file = replay;
        config.candidates = candidates;
        config.seed = seed;
        config.workers = workers;
        config.validate(false, false);

        std::vector<InputIoc> inputs;
        for (std::size_t i = 0; i < iocs.size(); ++i) inputs.push_back({"ioc-" + std::to_string(i + 1), iocs[i]});
        GenerateOutput out;
        {
            py::gil_scoped_release release;
            out = generate_products(inputs, PipelineContext::load(config), config);
        }
        py::dict d;
        d["products"] = to_py(out.products);
        d["rejections"] = to_py(out.rejections);
        d["annotations"] = to_py(out.annotations);
        d["traces"] = to_py(out.traces);
        d["summary"] = to_py(summary_to_json(out.summary, config));
        d["exit_code"] = out.exit_code;
        return d;
    }

    py::object evaluate(const py::handle& products, const py::handle& truths) const {
        return to_py(evaluate_products(from_py(products), from_py(truths), *normalizer_).report);
    }

private:
    std::vector<std::filesystem::path> kb_;
    std::vector<std::filesystem::path> tables_;
    KnowledgeStore store_;
    std::unique_ptr<Normalizer> normalizer_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "IOC-to-regex generation and evaluation";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<KnowledgeBaseError>(m, "KnowledgeBaseError", PyExc_ValueError);
    py::register_exception<ClassificationError>(m, "ClassificationError", PyExc_ValueError);
    py::register_exception<rx::SyntaxError>(m, "RegexSyntaxError", PyExc_ValueError);

    py::class_<Session>(m, "Session")
        .def(py::init<std::vector<std::filesystem::path>, std::vector<std::filesystem::path>>(), py::arg("kb"),
             py::arg("tables") = std::vector<std::filesystem::path>{})
        .def("classify", &Session::classify, py::arg("ioc"))
        .def("annotate", &Session::annotate, py::arg("ioc"), py::arg("bypass") = false)
        .def("grade", &Session::grade, py::arg("pattern"), py::arg("ioc"))
        .def("generate", &Session::generate, py::arg("iocs"), py::arg("mode") = "full",
             py::arg("backend") = "template_fallback", py::arg("replay") = std::filesystem::path{},
             py::arg("candidates") = 5, py::arg("seed") = 0, py::arg("workers") = 1)
        .def("evaluate", &Session::evaluate, py::arg("products"), py::arg("truths"));

    m.def("search", [](const std::string& pattern, const std::string& subject) {
        return rx::Regex::compile(pattern).search(subject);
    }, py::arg("pattern"), py::arg("subject"));
    m.def("escape", [](const std::string& s) { return rx::escape(s); }, py::arg("text"));
    m.def("similarity", [](const std::string& a, const std::string& b) { return similarity(a, b); });
    m.def("structural_similarity",
          [](const std::string& a, const std::string& b) { return structural_similarity(a, b); });
}
