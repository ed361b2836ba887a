"""Smoke test for the tabret_py extension.

Build first:  cargo build --release -p tabret-py --features extension-module
Then run:     python3 python/smoke_test.py [path/to/libtabret_py.so]
"""

import importlib.util
import json
import math
import pathlib
import shutil
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parent.parent


def load_extension(explicit=None):
    candidates = [pathlib.Path(explicit)] if explicit else [
        ROOT / "target" / profile / name
        for profile in ("release", "debug")
        for name in ("libtabret_py.so", "libtabret_py.dylib", "tabret_py.dll")
    ]
    for lib in candidates:
        if lib.exists():
            # the import system wants the module file named after the module
            tmp = pathlib.Path(tempfile.mkdtemp()) / "tabret_py.so"
            shutil.copy(lib, tmp)
            spec = importlib.util.spec_from_file_location("tabret_py", tmp)
            module = importlib.util.module_from_spec(spec)
            spec.loader.exec_module(module)
            return module
    sys.exit("extension not built; run: cargo build --release -p tabret-py --features extension-module")


def main():
    t = load_extension(sys.argv[1] if len(sys.argv) > 1 else None)

    assert t.tokenize("Olympic Games, 2008!") == ["olympic", "games", "2008"]
    assert abs(t.idf(100, 0) - math.log(202)) < 1e-12

    tables = [
        t.Table("a", ["country", "capital"], [["france", "paris"], ["japan", "tokyo"]], "capitals of the world"),
        t.Table("b", ["team", "wins"], [["lions", "12"]], "football standings"),
        t.Table("c", ["film", "year"], [["alien", "1979"]]),
    ]
    corpus = t.Corpus(tables)
    assert len(corpus) == 3 and corpus.get("c").caption is None
    try:
        t.Table("bad", ["x", "y"], [["only one"]])
        raise AssertionError("irregular table accepted")
    except ValueError:
        pass

    index = t.Bm25Index.build(corpus)
    top = index.retrieve("capital of japan", 2)
    assert top[0][0] == "a", top
    assert abs(index.score("capital of japan", "a") - top[0][1]) < 1e-12

    assert t.average_precision(["x", "r1", "y", "r2"], ["r1", "r2"]) == 0.5
    assert abs(t.average_precision(["r1"], ["r1", "r2"]) - 0.5) < 1e-12
    m, p1 = t.mean_average_precision([(["r", "x"], ["r"]), (["x", "r"], ["r"])])
    assert abs(m - 0.75) < 1e-12 and p1 == 0.5

    with tempfile.TemporaryDirectory() as tmp:
        data, out = pathlib.Path(tmp) / "data", pathlib.Path(tmp) / "out"
        t.synth(str(data), seed=3, tables=60, queries=20)
        report = json.loads(t.run_pipeline(str(data), str(out), mode="compare", nn_epochs=2, trees=20))
        labels = [row["label"] for row in report["rows"]]
        assert labels == ["BM25", "Feature", "NeuralNet", "Feature + NeuralNet"], labels
        forest = t.Forest.load(str(out / "ranker" / "feature.forest"))
        assert len(forest) == 20 and forest.features[0] == "bm25"
        print("rows:", {r["label"]: r["report"]["map"] for r in report["rows"]})

    print("smoke test passed")


if __name__ == "__main__":
    main()
