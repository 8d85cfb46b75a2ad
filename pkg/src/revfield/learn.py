"""Linear classifiers, baselines, feature assembly, splits, and evaluation.

Training standardizes features (frozen at fit time), then runs per-sample
SGD with a decaying learning rate eta_e = eta0/(1+e), shuffled per epoch
by seed.  Loss/gradient functions are exposed separately so tests can
check gradients against finite differences.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import expit

from .calculus import ScalarField


@dataclass(frozen=True)
class LinearModel:
    kind: str  # {logistic | hinge}
    weights: np.ndarray
    bias: float
    feature_means: np.ndarray
    feature_stds: np.ndarray
    epoch_losses: tuple[float, ...]

    def to_json(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(
                {
                    "kind": self.kind,
                    "weights": self.weights.tolist(),
                    "bias": self.bias,
                    "feature_means": self.feature_means.tolist(),
                    "feature_stds": self.feature_stds.tolist(),
                },
                ensure_ascii=False,
            )
            + "\n",
            encoding="utf-8",
        )

    @classmethod
    def from_json(cls, path: str | Path) -> "LinearModel":
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(
            obj["kind"],
            np.array(obj["weights"]),
            float(obj["bias"]),
            np.array(obj["feature_means"]),
            np.array(obj["feature_stds"]),
            (),
        )


@dataclass(frozen=True)
class EvalReport:
    accuracy: float
    f1: float
    positives_rate: float
    tp: int
    fp: int
    tn: int
    fn: int

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "f1": self.f1,
            "p_y": self.positives_rate,
            "tp": self.tp,
            "fp": self.fp,
            "tn": self.tn,
            "fn": self.fn,
        }


def _signs(y) -> np.ndarray:
    return np.where(np.asarray(y, dtype=bool), 1.0, -1.0)


def logistic_loss(
    weights: np.ndarray, bias: float, X: np.ndarray, y, l2: float
) -> tuple[float, np.ndarray, float]:
    """Mean log-loss + (l2/2)||w||^2 (bias unregularized), with its gradient."""
    yy = _signs(y)
    margins = yy * (X @ weights + bias)
    loss = float(np.logaddexp(0.0, -margins).mean() + 0.5 * l2 * weights @ weights)
    # d/dmargin of log(1+exp(-m)) = -sigmoid(-m)
    dscore = -yy * expit(-margins)
    grad_w = X.T @ dscore / len(yy) + l2 * weights
    grad_b = float(dscore.mean())
    return loss, grad_w, grad_b


def hinge_loss(
    weights: np.ndarray, bias: float, X: np.ndarray, y, l2: float
) -> tuple[float, np.ndarray, float]:
    """Mean hinge loss + (l2/2)||w||^2 with a subgradient (0 at the kink)."""
    yy = _signs(y)
    margins = yy * (X @ weights + bias)
    loss = float(np.maximum(0.0, 1.0 - margins).mean() + 0.5 * l2 * weights @ weights)
    active = margins < 1.0
    dscore = np.where(active, -yy, 0.0)
    grad_w = X.T @ dscore / len(yy) + l2 * weights
    grad_b = float(dscore.mean())
    return loss, grad_w, grad_b


_LOSSES = {"logistic": logistic_loss, "hinge": hinge_loss}


def _standardization(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    means = X.mean(axis=0)
    stds = X.std(axis=0)
    stds = np.where(stds > 0.0, stds, 1.0)
    return means, stds


def train(
    X,
    y,
    kind: str = "logistic",
    l2: float = 1e-4,
    epochs: int = 200,
    lr0: float = 0.1,
    seed: int = 0,
) -> LinearModel:
    """Per-sample SGD on the standardized, L2-regularized loss.

    Deterministic given the seed; the full-objective value after each
    epoch is recorded on the returned model.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=bool)
    if X.ndim != 2 or X.shape[0] != y.shape[0] or X.shape[0] < 2:
        raise ValueError("X rows must match y length (>= 2)")
    if y.all() or not y.any():
        raise ValueError("degenerate labels")
    if kind not in _LOSSES:
        raise ValueError(f"kind must be one of {tuple(_LOSSES)}, got {kind!r}")
    means, stds = _standardization(X)
    Xs = (X - means) / stds
    yy = _signs(y)
    n, d = Xs.shape
    w = np.zeros(d)
    b = 0.0
    rng = np.random.Generator(np.random.PCG64(seed))
    loss_fn = _LOSSES[kind]
    losses = []
    for epoch in range(epochs):
        eta = lr0 / (1.0 + epoch)
        for i in rng.permutation(n):
            x = Xs[i]
            margin = yy[i] * (w @ x + b)
            if kind == "logistic":
                dscore = -yy[i] * expit(-margin)
            else:
                dscore = -yy[i] if margin < 1.0 else 0.0
            w -= eta * (dscore * x + l2 * w)
            b -= eta * dscore
        losses.append(loss_fn(w, b, Xs, y, l2)[0])
    return LinearModel(kind, w, b, means, stds, tuple(losses))


def predict(model: LinearModel, X) -> tuple[np.ndarray, np.ndarray]:
    """Labels (score >= 0) and raw scores on standardized features."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != model.weights.shape[0]:
        raise ValueError("feature dimension mismatch")
    Xs = (X - model.feature_means) / model.feature_stds
    scores = Xs @ model.weights + model.bias
    return scores >= 0.0, scores


@dataclass(frozen=True)
class MajorityBaseline:
    label: bool

    def predict(self, count: int) -> np.ndarray:
        return np.full(count, self.label, dtype=bool)


def majority_baseline(y_train) -> MajorityBaseline:
    """Constant predictor of the more frequent training label; ties go negative."""
    y = np.asarray(y_train, dtype=bool)
    if y.size == 0:
        raise ValueError("empty training labels")
    positives = int(y.sum())
    return MajorityBaseline(positives > y.size - positives)


def evaluate(predicted, actual) -> EvalReport:
    predicted = np.asarray(predicted, dtype=bool)
    actual = np.asarray(actual, dtype=bool)
    if predicted.shape != actual.shape or predicted.size < 1:
        raise ValueError("predicted and actual labels must have equal length >= 1")
    tp = int((predicted & actual).sum())
    fp = int((predicted & ~actual).sum())
    tn = int((~predicted & ~actual).sum())
    fn = int((~predicted & actual).sum())
    accuracy = (tp + tn) / predicted.size
    denom = 2 * tp + fp + fn
    f1 = 2 * tp / denom if denom > 0 else 0.0
    return EvalReport(accuracy, f1, float(actual.mean()), tp, fp, tn, fn)


def split(
    n: int, policy: str = "random", fraction: float = 0.7, seed: int = 0
) -> tuple[np.ndarray, np.ndarray]:
    """Disjoint exhaustive train/test index split.

    random: seeded permutation; time-ordered: the earliest fraction trains
    (no temporal leakage).  Train size = round(fraction * n), clamped so
    both sides are nonempty.
    """
    if n < 2:
        raise ValueError("need at least 2 items to split")
    if not 0.0 < fraction < 1.0:
        raise ValueError("fraction outside (0, 1)")
    n_train = min(max(int(round(fraction * n)), 1), n - 1)
    if policy == "random":
        perm = np.random.Generator(np.random.PCG64(seed)).permutation(n)
        return np.sort(perm[:n_train]), np.sort(perm[n_train:])
    if policy in ("time-ordered", "time"):
        idx = np.arange(n)
        return idx[:n_train], idx[n_train:]
    raise ValueError(f"unknown split policy {policy!r}")


# --- TextTiling baseline -------------------------------------------------


def _block_counts(pseudosentences: list[dict], lo: int, hi: int) -> dict:
    out: dict = {}
    for ps in pseudosentences[lo:hi]:
        for t, c in ps.items():
            out[t] = out.get(t, 0) + c
    return out


def _cosine(a: dict, b: dict) -> float:
    dot = sum(c * b.get(t, 0) for t, c in a.items())
    na = np.sqrt(sum(c * c for c in a.values()))
    nb = np.sqrt(sum(c * c for c in b.values()))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return dot / (na * nb)


def _depth(sims: np.ndarray, g: int) -> float:
    def peak(step: int) -> float:
        best = sims[g]
        i = g + step
        while 0 <= i < len(sims) and sims[i] >= best:
            best = sims[i]
            i += step
        return best

    return (peak(-1) - sims[g]) + (peak(+1) - sims[g])


def texttiling(
    tokens,
    w: int = 20,
    cutoff="liberal",
    block_size: int = 10,
    min_gap_spacing: int | None = None,
) -> list[int]:
    """Boundary token offsets via block-comparison topic tiling.

    The sequence is cut into pseudosentences of w tokens (trailing
    remainder dropped).  At each gap, blocks of up to block_size
    pseudosentences on either side (clipped at the ends) are compared by
    cosine similarity of their token counts; the depth score of a gap sums
    its rises to the nearest similarity peaks left and right.  Gaps with
    depth >= cutoff (liberal: mean - std/2; strict: mean - std; or a
    number) become boundaries, greedily by depth with a minimum spacing in
    gap indices (default max(2, w//2) keeps boundaries non-adjacent).
    Sequences shorter than 2w yield [].
    """
    tokens = list(tokens)
    if w < 1:
        raise ValueError("w must be >= 1")
    if len(tokens) < 2 * w:
        return []
    m = len(tokens) // w
    pseudosentences = []
    for i in range(m):
        counts: dict = {}
        for t in tokens[i * w : (i + 1) * w]:
            counts[t] = counts.get(t, 0) + 1
        pseudosentences.append(counts)
    gaps = m - 1
    sims = np.empty(gaps)
    for g in range(gaps):
        left = _block_counts(pseudosentences, max(0, g - block_size + 1), g + 1)
        right = _block_counts(pseudosentences, g + 1, min(m, g + 1 + block_size))
        sims[g] = _cosine(left, right)
    depths = np.array([_depth(sims, g) for g in range(gaps)])
    if cutoff == "liberal":
        threshold = depths.mean() - depths.std() / 2.0
    elif cutoff == "strict":
        threshold = depths.mean() - depths.std()
    else:
        threshold = float(cutoff)
    spacing = max(2, w // 2) if min_gap_spacing is None else max(1, min_gap_spacing)
    candidates = [g for g in range(gaps) if depths[g] >= threshold]
    candidates.sort(key=lambda g: (-depths[g], g))
    selected: list[int] = []
    for g in candidates:
        if all(abs(g - s) >= spacing for s in selected):
            selected.append(g)
    return [(g + 1) * w for g in sorted(selected)]


# --- UNDO-prediction features --------------------------------------------


def _row_stats(values: np.ndarray) -> list[float]:
    return [
        float(values.min()),
        float(values.max()),
        float(values.mean()),
        float(np.median(values)),
    ]


def undo_features(
    norm_fields,
    h_curve: np.ndarray,
    g_curve: np.ndarray,
    t_index: int,
) -> np.ndarray:
    """21 summary features of one revision row.

    (min, max, mean, median) over s of each of the four derivative-norm
    fields' row t, the same four statistics of h(s), then g(t).
    norm_fields is the sequence (d1_space, d1_time, d2_space, d2_time).
    """
    fields = list(norm_fields)
    if len(fields) != 4:
        raise ValueError("expected the four derivative-norm fields")
    T = fields[0].grid_t
    if not 0 <= t_index < T:
        raise IndexError(f"t_index {t_index} outside [0, {T})")
    feats: list[float] = []
    for f in fields:
        if not isinstance(f, ScalarField) or f.grid_t != T:
            raise ValueError("norm fields must share one grid")
        feats.extend(_row_stats(f.values[:, t_index]))
    feats.extend(_row_stats(np.asarray(h_curve, dtype=float)))
    feats.append(float(np.asarray(g_curve, dtype=float)[t_index]))
    return np.array(feats)


def undo_dataset(norm_fields, h_curve, g_curve, undo_flags) -> tuple[np.ndarray, np.ndarray]:
    """Feature matrix and labels for next-revision undo prediction.

    Row t describes revision t and is labeled 1 iff revision t+1 carries
    the undo flag; the last revision has no successor and is dropped.
    Requires the field's time grid to have one row per revision.
    """
    flags = np.asarray(undo_flags, dtype=bool)
    T = list(norm_fields)[0].grid_t
    if T != flags.size:
        raise ValueError("time grid rows must equal the revision count")
    if T < 2:
        raise ValueError("need at least 2 revisions")
    X = np.stack(
        [undo_features(norm_fields, h_curve, g_curve, t) for t in range(T - 1)]
    )
    y = flags[1:]
    return X, y


# --- report table ---------------------------------------------------------


def format_report_table(rows: list[dict]) -> str:
    """Aligned text table: Article, Revisions, Voc. Size, p(y), then
    Accuracy and F1 for methods a, b, c."""
    headers = [
        "Article",
        "Revisions",
        "Voc. Size",
        "p(y)",
        "Acc a",
        "Acc b",
        "Acc c",
        "F1 a",
        "F1 b",
        "F1 c",
    ]
    table = [headers]
    for r in rows:
        table.append(
            [
                str(r["article"]),
                str(r["revisions"]),
                str(r["vocab_size"]),
                f"{r['p_y']:.3f}",
            ]
            + [f"{r['accuracy'][m]:.3f}" for m in ("a", "b", "c")]
            + [f"{r['f1'][m]:.3f}" for m in ("a", "b", "c")]
        )
    widths = [max(len(row[i]) for row in table) for i in range(len(headers))]
    lines = [
        "  ".join(cell.ljust(width) for cell, width in zip(row, widths)).rstrip()
        for row in table
    ]
    return "\n".join(lines) + "\n"
