"""Three-persona credit walkthrough.

* Data scientist: a sparse rule-based logistic model of the whole book.
* Applicant: the smallest change that would flip a rejection.
* Loan officer: approved applicants most similar to the rejected one.
"""

from __future__ import annotations

from pathlib import Path
from typing import Optional

import numpy as np

from .data import TabularDataset, load_csv, standardize
from .dise.glrm import GLRMExplainer
from .exemplar import ProtodashExplainer
from .explanation import serialize_explanation
from .local.cem import CEMExplainer
from .models import ScaledModel, train_logistic
from .synthetic import credit_dataset, write_csv


def load_heloc(path, label: str = "RiskPerformance") -> TabularDataset:
    """Load a HELOC-format CSV with a binary ``Good``/``Bad`` label (1 = Good).

    Rows with no bureau record (every feature -9) are dropped. The other special
    codes (-7, -8) stay as ordinary values, which sit below every real reading
    and so remain separable by threshold literals.
    """
    ds = load_csv(path, label=label)
    keep = ~np.all(ds.values == -9, axis=1)
    ds = ds.subset(np.flatnonzero(keep))
    if ds.label_levels and "Good" in ds.label_levels:
        good = ds.label_levels.index("Good")
        ds = TabularDataset(ds.feature_names, ds.kinds, ds.values,
                            (ds.labels == good).astype(np.int64), ds.levels, label,
                            ["Bad", "Good"])
    return ds


def run_demo(out_dir: Path, seed: int = 0, heloc: Optional[str] = None,
             label: str = "RiskPerformance") -> dict:
    """Write the dataset and three persona explanations into ``out_dir``.

    Returns:
        Mapping from persona to the explanation file written.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if heloc:
        ds = load_heloc(heloc, label)
    else:
        ds = credit_dataset(400, seed)
        write_csv(ds, out_dir / "credit.csv", label=label)

    glrm = GLRMExplainer(link="logit", lam=0.01, max_degree=2, max_terms=60).fit(ds)

    scaler, z = standardize(ds)
    model = ScaledModel(train_logistic(z.values, ds.labels, l2=1e-3, seed=seed), scaler)
    pred = model.predict(ds.values)
    rejected = np.flatnonzero(pred == 0)
    applicant = int(rejected[0]) if len(rejected) else 0
    x = ds.values[applicant]
    box = (ds.values.min(axis=0), ds.values.max(axis=0))
    cem = CEMExplainer(model, kappa=0.05, beta=0.01, max_iter=500, feature_box=box, seed=seed,
                       feature_names=ds.feature_names).fit(ds.values)

    approved = np.flatnonzero(pred == 1)
    pool = approved if len(approved) else np.arange(ds.n_rows)
    proto = ProtodashExplainer(m=3).fit(z.values[pool])
    proto_expl = proto.explain(scaler.transform(x)[None, :])
    # report indices into the full dataset, not the approved subset
    proto_expl.payload.indices = [int(pool[i]) for i in proto_expl.payload.indices]

    outputs = {
        "data scientist (GLRM)": ("glrm_rules.json", glrm.explain()),
        "applicant (CEM)": ("cem_contrast.json", cem.explain_instance(x, "PN")),
        "loan officer (ProtoDash)": ("protodash_prototypes.json", proto_expl),
    }
    paths = {}
    for persona, (name, expl) in outputs.items():
        path = out_dir / name
        path.write_text(serialize_explanation(expl), encoding="utf-8")
        paths[persona] = str(path)
    return paths
