"""Report assembly: best model per view, rank tables, narrative lift, file output."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from pathlib import Path

from ..ingest import view_definitions
from ..metrics import Candidate, EvalReport, candidate_view_ids, rank_views, reports_from_csv, \
    reports_to_csv
from ..records import ROAD_CLASSES
from .config import BASELINE, ExperimentConfig

FORMATS = ("csv", "json", "markdown")
MODEL_PRECEDENCE = {"GBT": 0, "RF": 1, "AdaBoost": 2}
FEATURIZER_PRECEDENCE = {"TFIDF": 0, "W2V": 1, BASELINE: 2}
TIE_RULE = "macro F1 desc; ties GBT > RF > AdaBoost, then TFIDF > W2V > None"
_VIEW_META = {vid: (scheme, name) for vid, scheme, name, _ in view_definitions()}


def parse_config_id(config_id: str, master_seed: int = 0) -> ExperimentConfig:
    view_id, featurizer, model = config_id.split("|")
    return ExperimentConfig(view_id, featurizer, model, master_seed)


def best_per_view(results) -> dict[str, tuple[ExperimentConfig, EvalReport]]:
    """Highest macro F1 per view under the fixed tie rule, in canonical view order."""
    best: dict[str, tuple] = {}
    for cfg, rep in results:
        key = (-rep.macro_f1, MODEL_PRECEDENCE[cfg.model], FEATURIZER_PRECEDENCE[cfg.featurizer])
        cur = best.get(cfg.view_id)
        if cur is None or key < cur[0]:
            best[cfg.view_id] = (key, cfg, rep)
    order = [vid for vid, *_ in view_definitions()]
    return {vid: best[vid][1:] for vid in order if vid in best}


def compute_rankings(results) -> dict:
    """Road class -> ranked candidate views, using each view's best macro F1."""
    best = best_per_view(results)
    cands = {}
    for rc in ROAD_CLASSES:
        cs = []
        for vid in candidate_view_ids(rc):
            if vid in best:
                scheme, name = _VIEW_META[vid]
                cs.append(Candidate(vid, scheme, name, best[vid][1].macro_f1))
        cands[rc] = cs
    return rank_views(cands)


@dataclass(frozen=True)
class LiftPair:
    view_id: str
    model: str
    featurizer: str
    narrative_f1: float
    baseline_f1: float

    @property
    def lift(self) -> float:
        return self.narrative_f1 - self.baseline_f1


def narrative_lift(results) -> list[LiftPair]:
    """Each narrative config against the structured-only config of the same (view, model)."""
    base = {(c.view_id, c.model): r.macro_f1 for c, r in results if c.featurizer == BASELINE}
    out = []
    for c, r in results:
        if c.featurizer != BASELINE and (c.view_id, c.model) in base:
            out.append(LiftPair(c.view_id, c.model, c.featurizer, r.macro_f1,
                                base[(c.view_id, c.model)]))
    return out


def lift_summary(pairs: list[LiftPair]) -> dict:
    if not pairs:
        return {"pairs": 0}
    wins = sum(p.narrative_f1 > p.baseline_f1 for p in pairs)
    by_pair: dict = {}
    for p in pairs:
        by_pair.setdefault((p.view_id, p.model), []).append(p)
    pair_wins = sum(all(q.narrative_f1 > q.baseline_f1 for q in qs) for qs in by_pair.values())
    return {"comparisons": len(pairs), "narrative_wins": wins, "win_rate": wins / len(pairs),
            "view_model_pairs": len(by_pair), "pairs_all_narrative_win": pair_wins,
            "pair_win_rate": pair_wins / len(by_pair),
            "mean_lift": sum(p.lift for p in pairs) / len(pairs)}


def _fmt(v) -> str:
    return f"{v:.3f}" if isinstance(v, float) else str(v)


def _block_markdown(cfg: ExperimentConfig, rep: EvalReport) -> str:
    lines = [f"### {cfg.view_id}: {cfg.featurizer} + {cfg.model}", "",
             "| Class | Precision | Recall | F1 | Support |", "|---|---|---|---|---|"]
    for row in rep.row_block():
        lines.append("| " + " | ".join(_fmt(v) for v in row[:5]) + " |")
    return "\n".join(lines)


def _rank_rows(rankings: dict, top: int = 3):
    for rc, ranked in rankings.items():
        for rcand in ranked[:top]:
            c = rcand.candidate
            yield [rc.value, rcand.rank, c.label, c.view_id, c.macro_f1]


def render_markdown(results, rankings, skipped=()) -> str:
    best = best_per_view(results)
    parts = ["# Crash severity experiment report", "",
             f"{len(results)} evaluated configurations. Best model per view: {TIE_RULE}.", "",
             "## Best model per view", ""]
    for vid, (cfg, rep) in best.items():
        parts += [_block_markdown(cfg, rep), ""]
    parts += ["## View ranking per road class (rank 1 to 3)", "",
              "| Road class | Rank | Group | View | Macro F1 |", "|---|---|---|---|---|"]
    for row in _rank_rows(rankings):
        parts.append("| " + " | ".join(_fmt(v) for v in row) + " |")
    pairs = narrative_lift(results)
    if pairs:
        s = lift_summary(pairs)
        parts += ["", "## Narrative lift over structured-only baselines", "",
                  f"Narrative configs beat their baseline in {s['narrative_wins']} of "
                  f"{s['comparisons']} comparisons (mean macro F1 lift {s['mean_lift']:.3f}).",
                  "", "| View | Model | Featurizer | Narrative F1 | Baseline F1 |",
                  "|---|---|---|---|---|"]
        for p in pairs:
            parts.append(f"| {p.view_id} | {p.model} | {p.featurizer} | "
                         f"{p.narrative_f1:.3f} | {p.baseline_f1:.3f} |")
    reasons = {}
    for cfg in skipped:
        reasons.setdefault(cfg.view_id, cfg.skip_reason)
    if reasons:
        parts += ["", "## Skipped views", ""]
        parts += [f"- {vid}: {reason}" for vid, reason in reasons.items()]
    return "\n".join(parts) + "\n"


def render_json(results, rankings, skipped=()) -> str:
    best = best_per_view(results)
    doc = {
        "tie_rule": TIE_RULE,
        "results": [{"config": cfg.to_dict(), "report": rep.to_dict()} for cfg, rep in results],
        "best_per_view": {vid: cfg.config_id for vid, (cfg, _) in best.items()},
        "rankings": {rc.value: [{"rank": r.rank, "view_id": r.candidate.view_id,
                                 "label": r.candidate.label, "macro_f1": r.candidate.macro_f1}
                                for r in ranked] for rc, ranked in rankings.items()},
        "narrative_lift": lift_summary(narrative_lift(results)),
        "skipped": [cfg.to_dict() for cfg in skipped],
    }
    return json.dumps(doc, indent=2, sort_keys=True)


def rankings_csv(rankings: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["road_class", "rank", "group", "view_id", "macro_f1"])
    for rc, ranked in rankings.items():
        for r in ranked:
            w.writerow([rc.value, r.rank, r.candidate.label, r.candidate.view_id,
                        repr(r.candidate.macro_f1)])
    return buf.getvalue()


def skipped_csv(skipped) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["config_id", "skip_reason"])
    for cfg in skipped:
        w.writerow([cfg.config_id, cfg.skip_reason])
    return buf.getvalue()


def emit_report(results, rankings=None, fmt: str = "markdown", out_dir=".",
                skipped=()) -> list[Path]:
    """Write the report in one format; ``results`` is a list of (config, EvalReport)."""
    if fmt not in FORMATS:
        raise ValueError(f"unknown report format {fmt!r}; expected one of {FORMATS}")
    results = list(results)
    if not results:
        raise ValueError("no results to report")
    rankings = compute_rankings(results) if rankings is None else rankings
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if fmt == "markdown":
        path = out / "report.md"
        path.write_text(render_markdown(results, rankings, skipped))
        return [path]
    if fmt == "json":
        path = out / "report.json"
        path.write_text(render_json(results, rankings, skipped))
        return [path]
    paths = [out / "results.csv", out / "rankings.csv"]
    paths[0].write_text(reports_to_csv(rep for _, rep in results))
    paths[1].write_text(rankings_csv(rankings))
    if skipped:
        paths.append(out / "skipped.csv")
        paths[-1].write_text(skipped_csv(skipped))
    return paths


def results_from_csv(text: str, master_seed: int = 0) -> list[tuple[ExperimentConfig, EvalReport]]:
    """Inverse of the ``results.csv`` written by :func:`emit_report`."""
    return [(parse_config_id(r.config_id, master_seed), r) for r in reports_from_csv(text)]
