"""Download the hyperspectral scenes used by the shipped configs.

The files are not redistributed with the package.  They are fetched from the
public Hyperspectral Remote Sensing Scenes collection hosted by the University
of the Basque Country (EHU).  No digests are published upstream, so the first
successful download records SHA-256 sums in ``SHA256SUMS`` next to the data
and later runs verify against it (``--verify`` only checks, never downloads).

Usage::

    python scripts/fetch_datasets.py --dest data
    export GCSC_DATA_DIR=$PWD/data
"""

import argparse
import hashlib
import sys
import urllib.request
from pathlib import Path

BASE = "https://www.ehu.eus/ccwintco/uploads"
FILES = {
    "SalinasA_corrected.mat": f"{BASE}/1/1a/SalinasA_corrected.mat",
    "SalinasA_gt.mat": f"{BASE}/a/aa/SalinasA_gt.mat",
    "Indian_pines_corrected.mat": f"{BASE}/6/67/Indian_pines_corrected.mat",
    "Indian_pines_gt.mat": f"{BASE}/c/c4/Indian_pines_gt.mat",
    "PaviaU.mat": f"{BASE}/e/ee/PaviaU.mat",
    "PaviaU_gt.mat": f"{BASE}/5/50/PaviaU_gt.mat",
}
# labeled pixels and classes inside each configured sub-scene
EXPECTED = {
    "salinasA_ekgcsc.toml": (5348, 6),
    "indianpines_ekgcsc.toml": (4391, 4),
    "paviaU_ekgcsc.toml": (6445, 8),
}
LOCKFILE = "SHA256SUMS"


def sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def read_lock(dest):
    lock = dest / LOCKFILE
    if not lock.exists():
        return {}
    out = {}
    for line in lock.read_text().splitlines():
        if line.strip():
            digest, name = line.split(maxsplit=1)
            out[name.strip()] = digest
    return out


def write_lock(dest, sums):
    lines = [f"{sums[n]}  {n}" for n in sorted(sums)]
    (dest / LOCKFILE).write_text("\n".join(lines) + "\n")


def download(url, path):
    tmp = path.with_suffix(path.suffix + ".part")
    with urllib.request.urlopen(url, timeout=120) as resp, open(tmp, "wb") as fh:
        while chunk := resp.read(1 << 20):
            fh.write(chunk)
    tmp.replace(path)


def structural_check(dest):
    import os

    from gcsc.config import load_config
    from gcsc.harness import _ingest

    os.environ["GCSC_DATA_DIR"] = str(dest)
    ok = True
    for name, (n_lab, n_cls) in EXPECTED.items():
        cfg = load_config(name)
        if not Path(cfg.dataset.path).exists():
            continue
        cube = _ingest(cfg)
        good = (cube.n_labeled, cube.n_classes) == (n_lab, n_cls)
        ok &= good
        print(f"{'ok' if good else 'MISMATCH'}  {name}: {cube.rows}x{cube.cols}x{cube.bands}, "
              f"{cube.n_labeled} labeled / {cube.n_classes} classes (expected {n_lab} / {n_cls})")
    return ok


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    parser.add_argument("--dest", default="data", help="target directory")
    parser.add_argument("--verify", action="store_true", help="only verify files already present")
    parser.add_argument("--only", nargs="*", choices=sorted(FILES), help="subset of files")
    args = parser.parse_args(argv)

    dest = Path(args.dest)
    dest.mkdir(parents=True, exist_ok=True)
    lock = read_lock(dest)
    failed = False
    for name in args.only or FILES:
        path = dest / name
        if not path.exists():
            if args.verify:
                print(f"missing  {name}")
                failed = True
                continue
            print(f"fetching {FILES[name]}")
            try:
                download(FILES[name], path)
            except OSError as exc:
                print(f"failed   {name}: {exc}", file=sys.stderr)
                failed = True
                continue
        digest = sha256(path)
        if name in lock and lock[name] != digest:
            print(f"CHECKSUM MISMATCH {name}: {digest} != {lock[name]}", file=sys.stderr)
            failed = True
        elif name not in lock:
            lock[name] = digest
            print(f"recorded {name} {digest}")
        else:
            print(f"verified {name}")
    if not args.verify:
        write_lock(dest, lock)
    failed |= not structural_check(dest)
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
