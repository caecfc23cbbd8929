"""Download the two public benchmark datasets used by the acceptance suite.

Fetches the liver-disorders table (bupa.data) and the sonar returns table
(sonar.all-data) from the UCI archive into datasets/, then verifies the
shape and field types of each file. Needs outbound network access:

    python scripts/fetch_uci.py
    python scripts/fetch_uci.py --dest /somewhere/else
"""

import argparse
import sys
import urllib.request
from pathlib import Path

BASE = "https://archive.ics.uci.edu/ml/machine-learning-databases"
FILES = {
    "bupa.data": f"{BASE}/liver-disorders/bupa.data",
    "sonar.all-data":
        f"{BASE}/undocumented/connectionist-bench/sonar/sonar.all-data",
}


def check_bupa(text):
    """345 rows of six numeric fields plus a 1/2 selector label."""
    rows = [r for r in text.strip().splitlines() if r.strip()]
    if len(rows) != 345:
        return f"expected 345 rows, found {len(rows)}"
    for i, row in enumerate(rows, 1):
        parts = row.split(",")
        if len(parts) != 7:
            return f"row {i}: expected 7 fields, found {len(parts)}"
        try:
            [float(p) for p in parts]
        except ValueError:
            return f"row {i}: non-numeric field"
        if parts[-1].strip() not in ("1", "2"):
            return f"row {i}: selector {parts[-1]!r} is not 1 or 2"
    return None


def check_sonar(text):
    """208 rows of sixty numeric fields plus an M/R label."""
    rows = [r for r in text.strip().splitlines() if r.strip()]
    if len(rows) != 208:
        return f"expected 208 rows, found {len(rows)}"
    for i, row in enumerate(rows, 1):
        parts = row.split(",")
        if len(parts) != 61:
            return f"row {i}: expected 61 fields, found {len(parts)}"
        try:
            [float(p) for p in parts[:-1]]
        except ValueError:
            return f"row {i}: non-numeric field"
        if parts[-1].strip() not in ("M", "R"):
            return f"row {i}: label {parts[-1]!r} is not M or R"
    return None


CHECKS = {"bupa.data": check_bupa, "sonar.all-data": check_sonar}


def fetch(name, url, dest, timeout):
    target = dest / name
    if target.exists():
        problem = CHECKS[name](target.read_text())
        if problem is None:
            print(f"{name}: already present and valid, skipping")
            return True
        print(f"{name}: present but invalid ({problem}), refetching")
    print(f"{name}: downloading {url}")
    try:
        with urllib.request.urlopen(url, timeout=timeout) as resp:
            raw = resp.read()
    except OSError as exc:
        print(f"{name}: download failed: {exc}")
        return False
    text = raw.decode("utf-8", errors="strict")
    problem = CHECKS[name](text)
    if problem is not None:
        print(f"{name}: downloaded file failed validation: {problem}")
        return False
    target.write_bytes(raw)
    print(f"{name}: wrote {len(raw)} bytes to {target}")
    return True


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    default_dest = Path(__file__).resolve().parents[1] / "datasets"
    ap.add_argument("--dest", type=Path, default=default_dest,
                    help="directory to write into (default: datasets/)")
    ap.add_argument("--timeout", type=float, default=30.0,
                    help="per-request timeout in seconds")
    args = ap.parse_args(argv)
    args.dest.mkdir(parents=True, exist_ok=True)
    ok = all([fetch(name, url, args.dest, args.timeout)
              for name, url in FILES.items()])
    if ok:
        print("all datasets ready")
        return 0
    print("some downloads failed; the acceptance tests that need them "
          "will skip")
    return 1


if __name__ == "__main__":
    sys.exit(main())
