def pytest_terminal_summary(terminalreporter):
    lines = []
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            props = dict(getattr(rep, "user_properties", ()))
            if "criterion" in props and rep.when == "call":
                lines.append((props["criterion"], "PASS" if outcome == "passed" else "FAIL", props.get("summary", "")))
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for n, verdict, text in sorted(lines):
        terminalreporter.write_line(f"criterion {n}: {verdict}  {text}")
