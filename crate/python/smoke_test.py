"""Build the extension with cargo, import it and exercise each binding.

    python3 python/smoke_test.py
"""

import math
import os
import shutil
import subprocess
import sys
import tempfile

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def build():
    subprocess.run(["cargo", "build", "-q", "-p", "framing-py"], cwd=ROOT, check=True)
    lib_dir = os.path.join(ROOT, "target", "debug")
    for name in ("libframing_py.so", "libframing_py.dylib", "framing_py.dll"):
        src = os.path.join(lib_dir, name)
        if os.path.exists(src):
            dest_dir = tempfile.mkdtemp()
            ext = ".pyd" if name.endswith(".dll") else ".so"
            shutil.copy(src, os.path.join(dest_dir, "framing_py" + ext))
            sys.path.insert(0, dest_dir)
            return
    sys.exit("extension library not found under target/debug")


def main():
    build()
    import framing_py as fp

    chunks = fp.split_paragraph("One two. Three four five. Six.", 3)
    assert [c[1] for c in chunks] == [2, 3, 1], chunks

    assert fp.cosine_distance([1.0, 0.0], [0.0, 1.0]) == 1.0
    try:
        fp.cosine_distance([0.0, 0.0], [1.0, 0.0])
        raise AssertionError("zero vector accepted")
    except ValueError:
        pass

    assert fp.kendall_tau([["a"], ["b"], ["c"]], [["c"], ["b"], ["a"]]) == -1.0
    assert math.isclose(fp.tau_b([0, 1, 2, 3], [0, 1, 3, 2]), 2 / 3)

    names = ["a", "b", "c"]
    d = [[0, 0.1, 0.9], [0.1, 0, 0.8], [0.9, 0.8, 0]]
    ranks = fp.similarity_rankings(names, d)
    assert ranks["a"] == [["b"], ["c"]], ranks
    merges = fp.agglomerative_cluster(names, d)
    assert merges == [(["a"], ["b"], 0.1), (["a", "b"], ["c"], 0.9)], merges

    survey = "outlet,All U.S. adults,Democrat/Lean Dem\nABC News,33%,37%\n"
    prof = fp.normalize_survey(survey)
    assert abs(prof["ABC News"]["Democrat/Lean Dem"] - 1.12) < 0.005
    assert fp.leaning_score("Lean Right") == 1

    vocab, rows = fp.align({"x": {"b": 1.0}, "y": {"a": 2.0}})
    assert vocab == ["a", "b"] and rows == {"x": [0.0, 1.0], "y": [2.0, 0.0]}

    shared = fp.extract_shared_ngrams({"s1": ["the tax plan"], "s2": ["a tax plan"]}, 2)
    assert shared == [["tax", "plan"]], shared

    prompts = fp.manual_prompts("aca", ["the law"])
    qa = [p for p in prompts if "/qa/" in p[0]]
    assert qa and all(p[2] == ["Yes", "True", "Maybe", "No", "False"] for p in qa)

    model = fp.TfidfModel(["the tax plan", "the health plan"], 1)
    assert model.dim == 4
    v = model.embed("tax plan")
    assert math.isclose(math.sqrt(sum(x * x for x in v)), 1.0)

    print("python smoke test passed")


if __name__ == "__main__":
    main()
