"""The ten acceptance criteria, one PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py -s`` or ``python3 tests/test_acceptance.py``.
Criterion 3 needs a HELOC CSV named by the XPLAIN_HELOC_CSV environment variable.
"""

import contextlib
import io
import os
import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from oracles import (central_difference, exhaustive_dnf_optimum, exhaustive_prototypes,  # noqa: E402
                     logistic_pn_distance, relative_error, shapley_permutations)
from xplain.cli import run_cli  # noqa: E402
from xplain.core import ExplainerKind as K  # noqa: E402
from xplain.core import FunctionModel, QuestionKind, recommend_explainers  # noqa: E402
from xplain.data import Scaler, TabularDataset  # noqa: E402
from xplain.demo import load_heloc, run_demo  # noqa: E402
from xplain.dise import BRCGExplainer, brcg_fit  # noqa: E402
from xplain.explanation import parse_explanation  # noqa: E402
from xplain.exemplar import median_bandwidth, protodash, rbf_kernel  # noqa: E402
from xplain.local import kernel_shap  # noqa: E402
from xplain.local.cem import cem_pn  # noqa: E402
from xplain.metrics import faithfulness, monotonicity, score_drops  # noqa: E402
from xplain.models import LogisticModel, ScaledModel, train_logistic, train_mlp  # noqa: E402
from xplain.profweight import profweight, train_probes  # noqa: E402
from xplain.synthetic import credit_dataset, noisy_band, write_csv  # noqa: E402

HELOC_ENV = "XPLAIN_HELOC_CSV"


class Skipped(Exception):
    pass


# -- criterion checks; each returns (passed, detail) ---------------------------------

def c1_shapley():
    start = time.perf_counter()
    worst = 0.0
    for seed in range(25):
        rng = np.random.default_rng(seed)
        lin, quad, cube = rng.normal(size=5), rng.normal(size=(5, 5)), rng.normal()
        i, j, k = rng.choice(5, 3, replace=False)

        def f(X):
            return X @ lin + np.einsum("ni,ij,nj->n", X, np.triu(quad, 1), X) \
                + cube * X[:, i] * X[:, j] * X[:, k]
        x, base = rng.normal(size=5), rng.normal(size=5)
        a = kernel_shap(lambda X: f(np.atleast_2d(X)), base, x)
        ref = shapley_permutations(lambda m: f(np.where(m, x, base)[None, :])[0], 5)
        worst = max(worst, float(np.abs(a.values - ref).max()))
    took = time.perf_counter() - start
    return worst <= 1e-8 and took < 10, f"max abs error {worst:.2e}, {took:.2f}s"


def c2_brcg():
    start = time.perf_counter()
    misses = []
    for seed in range(20):
        rng = np.random.default_rng(seed)
        B, y = rng.integers(0, 2, (8, 3)), rng.integers(0, 2, 8)
        rule = brcg_fit(B, y, max_degree=2, max_clauses=2, seed=seed)
        best = exhaustive_dnf_optimum(B, y, 0.001, 0.001)
        if abs(rule.objective - best) > 1e-12:
            misses.append(seed)
    took = time.perf_counter() - start
    return not misses and took < 30, f"{20 - len(misses)}/20 optimal, {took:.2f}s"


def c3_heloc():
    path = os.environ.get(HELOC_ENV)
    if not path:
        raise Skipped(f"{HELOC_ENV} not set")
    return heloc_cv(load_heloc(path))


def heloc_cv(ds: TabularDataset, folds: int = 5, seed: int = 0):
    order = np.random.default_rng(seed).permutation(ds.n_rows)
    accs, sizes = [], []
    for part in np.array_split(order, folds):
        train = ds.subset(np.setdiff1d(order, part))
        test = ds.subset(np.sort(part))
        ex = BRCGExplainer().fit(train)
        accs.append(float(np.mean(ex.predict(test) == test.labels)))
        sizes.append(len(ex.model.clauses))
    acc = float(np.mean(accs))
    return max(sizes) <= 4 and acc >= 0.69, f"CV accuracy {acc:.3f}, clauses per fold {sizes}"


def c4_cem():
    worst, unflipped, failed = 0.0, 0, 0
    for seed in range(30):
        rng = np.random.default_rng(seed)
        d = 2 + seed % 4
        w, b = rng.normal(size=d), rng.normal()
        m = LogisticModel.binary(w, b)
        x = rng.normal(size=d)
        c = cem_pn(m, x, kappa=0.05, beta=1e-4, raise_on_failure=False)
        if not c.converged:
            failed += 1
            continue
        ref = logistic_pn_distance(w, b, x, 0.05)
        worst = max(worst, abs(c.l2 - ref) / ref)
        unflipped += int(m.predict(c.point)[0] == m.predict(x)[0])
    ok = worst <= 0.05 and unflipped == 0 and failed == 0
    return ok, f"worst relative gap {worst:.4f}, unflipped {unflipped}, not converged {failed}"


def c5_protodash():
    worst = np.inf
    for seed in range(20):
        rng = np.random.default_rng(seed)
        n, m = int(rng.integers(6, 13)), int(rng.integers(1, 4))
        X = rng.normal(size=(n, int(rng.integers(2, 5))))
        p = protodash(X, X, m)
        K_ = rbf_kernel(X, X, median_bandwidth(X))
        best = exhaustive_prototypes(K_.mean(axis=0), K_, m)
        worst = min(worst, p.objective / best)
    split = 0
    for seed in range(10):
        rng = np.random.default_rng(seed)
        X = np.vstack([rng.normal(scale=0.1, size=(3, 2)), rng.normal(scale=0.1, size=(3, 2)) + 5])
        split += sorted(i // 3 for i in protodash(X, X, 2).indices) == [0, 1]
    return worst >= 0.75 and split == 10, f"worst ratio {worst:.4f}, two-cluster {split}/10"


def c6_profweight():
    gains = []
    for seed in range(13, 23):
        X, y, _ = noisy_band(2000, seed)
        Xt, yt, _ = noisy_band(20000, 10_000 + seed, clean=True)
        mlp = train_mlp(X, y, hidden=(32, 32), epochs=200, lr=0.05, seed=seed)
        res = profweight(mlp, train_probes(mlp, X, y, seed=seed), X, y, test=(Xt, yt))
        gains.append(res.weights.reweighted_acc - res.weights.baseline_acc)
    wins = sum(g >= 0.02 for g in gains)
    ok = gains[0] >= 0 and wins >= 7
    return ok, (f"seed 13 gain {100 * gains[0]:+.2f} pts, +2 pts on {wins}/10 seeds "
                f"(gains {', '.join(f'{100 * g:+.1f}' for g in gains)})")


def c7_metrics():
    bad = 0
    for seed in range(10):
        rng = np.random.default_rng(seed)
        d = 3 + seed % 4
        m = LogisticModel.binary(rng.normal(size=d) * 2, rng.normal())
        x, base = rng.normal(size=d), rng.normal(size=d)
        drops = score_drops(m, x, base, 1)
        bad += abs(faithfulness(m, x, drops, base, 1).value - 1) > 1e-12
        bad += abs(faithfulness(m, x, -drops, base, 1).value + 1) > 1e-12
    single = monotonicity(LogisticModel.binary([2.0]), np.ones(1), np.ones(1), np.zeros(1), 1)
    data = np.random.default_rng(7).normal(size=(40, 3))
    pos = LogisticModel.binary([0.8, 1.5, 0.3])
    x = data.max(axis=0)
    shap = monotonicity(pos, x, kernel_shap(pos, data.min(axis=0), x, cls=1))

    def xor(X):
        p = np.logical_xor(X[:, 0] > 0.5, X[:, 1] > 0.5).astype(float)
        return np.column_stack([1 - p, p])
    xr = monotonicity(FunctionModel(xor, 2), np.ones(2), np.array([0.2, 0.1]), np.zeros(2), 1)
    ok = bad == 0 and single.value is True and shap.value is True and xr.value is False
    return ok, (f"faithfulness failures {bad}/20, monotonicity single={single.value} "
                f"logistic={shap.value} xor={xr.value}")


def c8_gradients():
    worst, kinds = 0.0, {"logistic": 0, "multiclass": 0, "mlp": 0, "scaled": 0}
    for seed in range(100):
        rng = np.random.default_rng(seed)
        d = int(rng.integers(2, 7))
        X = rng.normal(size=(60, d))
        kind = list(kinds)[seed % 4]
        kinds[kind] += 1
        if kind == "logistic":
            m = LogisticModel.binary(rng.normal(size=d) * 2, rng.normal())
        elif kind == "multiclass":
            m = train_logistic(X, rng.integers(0, 3, 60), seed=seed, num_classes=3)
        elif kind == "mlp":
            y = (X[:, 0] * X[:, 1] > 0).astype(int)
            m = train_mlp(X, y, hidden=tuple(rng.integers(3, 9, rng.integers(1, 3))),
                          epochs=5, seed=seed)
        else:
            m = ScaledModel(LogisticModel.binary(rng.normal(size=d)),
                            Scaler(rng.normal(size=d), rng.random(d) + 0.5))
        x = rng.normal(size=d)
        cls = int(rng.integers(m.num_classes))
        fd = central_difference(lambda z: m.score(z)[cls], x)
        worst = max(worst, relative_error(m.gradient(x, cls), fd))
    return worst <= 1e-4, f"worst relative error {worst:.2e} over {kinds}"


def c9_determinism(tmp: Path):
    ds = credit_dataset(150, 0)
    write_csv(ds, tmp / "credit.csv", label="label")
    X, y, _ = noisy_band(300, 0)
    write_csv(TabularDataset.from_arrays(X, y, ["u", "v"]), tmp / "band.csv", label="label")
    data = ["--data", str(tmp / "credit.csv"), "--label", "label"]
    band = ["--data", str(tmp / "band.csv"), "--label", "label"]
    model, mlp = str(tmp / "m.json"), str(tmp / "mlp.json")
    prep = [["fit", *data, "--out", model],
            ["fit", *band, "--model-type", "mlp", "--hidden", "8,8", "--epochs", "20",
             "--out", mlp],
            ["explain", "--method", "kshap", *data, "--model", model, "--instance", "3",
             "--out", str(tmp / "k.json")]]
    for argv in prep:
        if run_cli(argv) != 0:
            return False, f"setup failed: {argv[:3]}"
    runs = {
        "fit": ["fit", *data, "--model-type", "mlp", "--hidden", "6", "--epochs", "10"],
        "explain brcg": ["explain", "--method", "brcg", *data],
        "explain glrm": ["explain", "--method", "glrm", *data],
        "explain ted": None,
        "explain protodash": ["explain", "--method", "protodash", *data, "--instance", "2"],
        "explain lime": ["explain", "--method", "lime", *data, "--model", model,
                         "--instance", "3", "--param", "nsamples=500"],
        "explain kshap": ["explain", "--method", "kshap", *data, "--model", model,
                          "--instance", "3"],
        "explain cem": ["explain", "--method", "cem", *data, "--model", model, "--instance", "1"],
        "explain profweight": ["explain", "--method", "profweight", *band, "--model", mlp],
        "metrics": ["metrics", "--explanation", str(tmp / "k.json"), "--model", model,
                    "--instance", "3", *data],
    }
    # TED needs a column holding the explanation id for each row
    ted = TabularDataset.from_arrays(np.column_stack([ds.values, ds.labels + 2 * (ds.values[:, 5] > 1)]),
                                     ds.labels, list(ds.feature_names) + ["why"])
    write_csv(ted, tmp / "ted.csv", label="label")
    runs["explain ted"] = ["explain", "--method", "ted", "--data", str(tmp / "ted.csv"),
                           "--label", "label", "--param", "explanation_column=why",
                           "--instance", "0"]
    differ = []
    for name, argv in runs.items():
        outs = []
        for rep in range(2):
            out = tmp / f"{name.replace(' ', '_')}_{rep}.json"
            if run_cli([*argv, "--seed", "4", "--out", str(out)]) != 0:
                return False, f"{name} failed"
            outs.append(out.read_bytes())
        if outs[0] != outs[1]:
            differ.append(name)
    texts = []
    for _ in range(2):
        buf = io.StringIO()
        with contextlib.redirect_stdout(buf):
            code = run_cli(["recommend", "--question", "Q2"])
        if code != 0:
            return False, "recommend failed"
        texts.append(buf.getvalue())
    if texts[0] != texts[1]:
        differ.append("recommend")
    paths, took = {}, 0.0
    for rep in "ab":
        start = time.perf_counter()
        paths[rep] = run_demo(tmp / f"demo_{rep}", seed=4)
        took = max(took, time.perf_counter() - start)
    same_demo = all(Path(paths["a"][p]).read_bytes() == Path(paths["b"][p]).read_bytes()
                    for p in paths["a"])
    if not same_demo:
        differ.append("demo")
    kinds = sorted(parse_kind(Path(p)) for p in paths["a"].values())
    ok = not differ and took < 60 and kinds == ["contrast", "prototype_set", "rule_terms"]
    return ok, (f"{len(runs) + 2} subcommands run twice, differing: {differ or 'none'}; "
                f"demo {took:.1f}s with kinds {kinds}")


def parse_kind(path: Path) -> str:
    return parse_explanation(path.read_text()).kind


def c10_routing():
    want = {
        QuestionKind.Q1_GlobalImportant: [K.BRCG, K.GLRM, K.ProfWeight],
        QuestionKind.Q2_LocalDrivers: [K.LIME, K.KernelSHAP],
        QuestionKind.Q3_MinimalChange: [K.CEM, K.CEM_MAF],
        QuestionKind.Q4_SimilarInputs: [K.ProtoDash],
    }
    got = {q: recommend_explainers(q) for q in QuestionKind}
    labels = "; ".join(f"{q.value}: {', '.join(k.label for k in v)}" for q, v in got.items())
    return got == want, labels


CRITERIA = [
    (1, "Shapley oracle equivalence", c1_shapley),
    (2, "BRCG oracle equivalence", c2_brcg),
    (3, "HELOC rule set", c3_heloc),
    (4, "CEM analytic distance", c4_cem),
    (5, "ProtoDash near-optimality", c5_protodash),
    (6, "ProfWeight improvement", c6_profweight),
    (7, "Metric sanity", c7_metrics),
    (8, "Gradient suite", c8_gradients),
    (9, "CLI determinism and demo", c9_determinism),
    (10, "Routing fidelity", c10_routing),
]


def run_one(number, title, check, tmp=None):
    """Run one criterion and return its status line and outcome."""
    try:
        ok, detail = check(tmp) if number == 9 else check()
    except Skipped as e:
        return f"SKIPPED criterion {number}: {title} ({e})", None
    return f"{'PASS' if ok else 'FAIL'} criterion {number}: {title} ({detail})", ok


@pytest.mark.parametrize("number,title,check", CRITERIA, ids=[f"c{n}" for n, _, _ in CRITERIA])
def test_criterion(number, title, check, tmp_path, capsys):
    line, ok = run_one(number, title, check, tmp_path)
    with capsys.disabled():
        print("\n" + line)
    if ok is None:
        pytest.skip(line)
    assert ok, line


def fake_heloc(path: Path, n: int, seed: int = 0):
    """HELOC-shaped file: string labels first, -9 rows, and -7/-8 codes."""
    rng = np.random.default_rng(seed)
    ds = credit_dataset(n, seed)
    X = ds.values.copy()
    X[rng.random(n) < 0.05] = -9
    X[rng.random(n) < 0.2, 1] = -7
    names = ds.feature_names
    lines = [",".join(["RiskPerformance", *names])]
    for row, lab in zip(X, ds.labels):
        lines.append(",".join(["Good" if lab else "Bad", *(format(v, "g") for v in row)]))
    path.write_text("\n".join(lines) + "\n")


def test_heloc_pipeline_on_shaped_file(tmp_path):
    """Exercises the criterion-3 path end to end; the accuracy bar is not asserted here."""
    fake_heloc(tmp_path / "heloc.csv", 400)
    ds = load_heloc(tmp_path / "heloc.csv")
    assert ds.n_rows < 400 and set(np.unique(ds.labels)) == {0, 1}
    assert not np.any(np.all(ds.values == -9, axis=1))
    ok, detail = heloc_cv(ds)
    assert "CV accuracy" in detail


if __name__ == "__main__":
    import tempfile

    with tempfile.TemporaryDirectory() as d:
        results = [run_one(n, t, c, Path(d)) for n, t, c in CRITERIA]
    for line, _ in results:
        print(line)
    sys.exit(0 if all(ok is not False for _, ok in results) else 1)
