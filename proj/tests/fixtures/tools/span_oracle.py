#!/usr/bin/env python3
"""Line-oriented span table for the mini fixture.

Deliberately simple and independent of the C++ indexer: a method starts on a
line matching a declaration regex at class-body depth and ends on the line
where its brace depth returns to the starting depth. Strings, char literals
and comments are blanked before brace counting.
"""
import json
import re
import sys
from pathlib import Path

DECL = re.compile(
    r"^\s*(?:(?:public|protected|private|static|final|abstract|synchronized)\s+)*"
    r"(?:[\w<>\[\],.]+\s+)?(\w+)\s*\([^;]*$")
KEYWORDS = {"if", "for", "while", "switch", "catch", "return", "new", "else", "throw"}


def blank(line, in_block):
    out = []
    i = 0
    while i < len(line):
        if in_block:
            if line.startswith("*/", i):
                in_block = False
                i += 2
            else:
                i += 1
            continue
        if line.startswith("/*", i):
            in_block = True
            i += 2
            continue
        if line.startswith("//", i):
            break
        c = line[i]
        if c in "\"'":
            j = i + 1
            while j < len(line) and line[j] != c:
                j += 2 if line[j] == "\\" else 1
            i = j + 1
            out.append(" ")
            continue
        out.append(c)
        i += 1
    return "".join(out), in_block


def spans(path):
    lines = path.read_text().split("\n")
    depth = 0
    in_block = False
    cls_depth = []
    pending = None
    result = []
    for no, raw in enumerate(lines, 1):
        code, in_block = blank(raw, in_block)
        m = DECL.match(code)
        if pending is None and m and m.group(1) not in KEYWORDS and depth >= 1 \
                and "class " not in code and "enum " not in code:
            pending = (m.group(1), no, depth)
        for ch in code:
            if ch == "{":
                depth += 1
            elif ch == "}":
                depth -= 1
                if pending and depth == pending[2]:
                    result.append((pending[0], pending[1], no))
                    pending = None
    return result


def main():
    root = Path(sys.argv[1])
    table = []
    for f in sorted((root / "src").rglob("*.java")):
        cls = "mini.calc." + f.stem
        for name, start, end in spans(f):
            table.append({"class": cls, "file": str(f.relative_to(root)),
                          "method": name, "decl_line": start, "end_line": end})
    json.dump(table, sys.stdout, indent=1)


if __name__ == "__main__":
    main()
