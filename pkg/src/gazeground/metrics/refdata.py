"""Published evaluation results bundled as reference data.

These are the previously published scores for the six-model roster on the
560-study gaze-grounded corpus. They serve two purposes: regression checks
for the normalization/delta arithmetic (recomputing the aggregate columns
from the raw metric columns must land on the printed values), and a worked
example for the report formatter. Values are transcribed digits, not
outputs of this harness.
"""

from __future__ import annotations

from . import MetricRow

# (model, method, rouge_l, bertscore, radgraph_xl, ratescore,
#  printed clinical average %, printed overall average %)
REFERENCE_LEADERBOARD: tuple[tuple[str, str, float, float, float, float, float, float], ...] = (
    ("CXR-LLaVA", "-", 0.1653, 0.8586, 0.1107, 0.4730, 84.42, 73.21),
    ("CXR-LLaVA", "L", 0.1652, 0.8592, 0.1048, 0.4626, 81.46, 72.04),
    ("CXR-LLaVA", "M", 0.1672, 0.8579, 0.1093, 0.4687, 83.55, 73.07),
    ("CXR-LLaVA", "L&M", 0.1697, 0.8602, 0.1148, 0.4752, 86.01, 74.40),
    ("MAIRA2", "-", 0.1460, 0.8492, 0.0868, 0.4507, 74.35, 66.70),
    ("MAIRA2", "L", 0.1419, 0.8487, 0.0824, 0.4460, 72.45, 65.44),
    ("MAIRA2", "M", 0.1469, 0.8489, 0.0810, 0.4574, 73.16, 66.31),
    ("MAIRA2", "L&M", 0.1469, 0.8489, 0.0810, 0.4574, 73.16, 66.31),
    ("LLaVA-Med", "-", 0.0942, 0.8392, 0.0000, 0.2445, 24.99, 40.62),
    ("LLaVA-Med", "L", 0.0818, 0.8216, 0.0011, 0.2511, 26.02, 39.15),
    ("LLaVA-Med", "M", 0.0900, 0.8281, 0.0270, 0.3107, 40.56, 46.09),
    ("LLaVA-Med", "L&M", 0.0817, 0.8253, 0.0295, 0.4191, 52.46, 49.81),
    ("Llama3.2V", "-", 0.0413, 0.7652, 0.1412, 0.0027, 46.34, 41.32),
    ("Llama3.2V", "L", 0.0370, 0.7656, 0.1155, 0.0035, 38.01, 37.39),
    ("Llama3.2V", "M", 0.0400, 0.7697, 0.1528, 0.0078, 50.64, 42.89),
    ("Llama3.2V", "L&M", 0.0393, 0.7694, 0.1494, 0.0071, 49.44, 42.30),
    ("Llama3.2V", "I", 0.0415, 0.7652, 0.1471, 0.0039, 48.38, 42.13),
    ("Llama3.2V", "I&L", 0.0374, 0.7654, 0.1269, 0.0031, 41.70, 38.80),
    ("Llama3.2V", "I&M", 0.0400, 0.7694, 0.1479, 0.0074, 49.00, 42.23),
    ("Llama3.2V", "I&L&M", 0.0402, 0.7696, 0.1533, 0.0089, 50.91, 42.99),
    ("LLaVA-OV", "-", 0.0518, 0.8085, 0.0471, 0.3936, 55.58, 47.14),
    ("LLaVA-OV", "L", 0.0484, 0.8087, 0.0485, 0.4029, 57.00, 47.31),
    ("LLaVA-OV", "M", 0.0565, 0.8110, 0.0518, 0.4567, 63.56, 50.95),
    ("LLaVA-OV", "L&M", 0.0527, 0.8107, 0.0497, 0.4531, 62.51, 50.07),
    ("LLaVA-OV", "I", 0.0920, 0.8384, 0.1101, 0.4354, 80.41, 62.50),
    ("LLaVA-OV", "I&L", 0.0738, 0.8268, 0.1068, 0.4386, 79.67, 59.79),
    ("LLaVA-OV", "I&M", 0.0966, 0.8350, 0.1081, 0.4685, 83.13, 64.05),
    ("LLaVA-OV", "I&L&M", 0.0959, 0.8365, 0.1145, 0.4893, 87.34, 65.69),
    ("Qwen2.5VL", "-", 0.0576, 0.8080, 0.0534, 0.4291, 61.27, 50.08),
    ("Qwen2.5VL", "L", 0.0530, 0.7989, 0.0461, 0.3926, 55.14, 46.88),
    ("Qwen2.5VL", "M", 0.0496, 0.7980, 0.0588, 0.4545, 65.63, 50.65),
    ("Qwen2.5VL", "L&M", 0.0427, 0.7933, 0.0528, 0.4488, 63.08, 48.71),
    ("Qwen2.5VL", "I", 0.0877, 0.8104, 0.1063, 0.4416, 79.80, 61.10),
    ("Qwen2.5VL", "I&L", 0.0650, 0.8047, 0.0812, 0.4469, 80.02, 58.38),
    ("Qwen2.5VL", "I&M", 0.0914, 0.8201, 0.1175, 0.4914, 88.53, 65.26),
    ("Qwen2.5VL", "I&L&M", 0.0614, 0.8045, 0.0812, 0.4730, 74.83, 55.88),
)

# Printed per-metric differences from each model's baseline row, as shown in
# the headline results table (raw-metric deltas plus aggregate deltas).
PRINTED_DELTAS: dict[tuple[str, str], dict[str, float]] = {
    ("CXR-LLaVA", "L&M"): {
        "rouge_l": 0.0044, "bertscore": 0.0016, "radgraph_xl": 0.0041,
        "ratescore": 0.0022, "c_avg_pct": 1.59, "a_avg_pct": 1.19,
    },
    ("MAIRA2", "L&M"): {
        "rouge_l": 0.0009, "bertscore": -0.0003, "radgraph_xl": -0.0058,
        "ratescore": 0.0067, "c_avg_pct": -1.19, "a_avg_pct": -0.39,
    },
    ("LLaVA-Med", "L&M"): {
        "rouge_l": -0.0125, "bertscore": -0.0139, "radgraph_xl": 0.0295,
        "ratescore": 0.1746, "c_avg_pct": 27.47, "a_avg_pct": 9.19,
    },
    ("Llama3.2V", "L&M"): {
        "rouge_l": -0.0020, "bertscore": 0.0042, "radgraph_xl": 0.0082,
        "ratescore": 0.0044, "c_avg_pct": 3.10, "a_avg_pct": 0.98,
    },
    ("Llama3.2V", "I&L&M"): {
        "rouge_l": -0.0011, "bertscore": 0.0044, "radgraph_xl": 0.0121,
        "ratescore": 0.0062, "c_avg_pct": 4.57, "a_avg_pct": 1.67,
    },
    ("LLaVA-OV", "L&M"): {
        "rouge_l": 0.0009, "bertscore": 0.0022, "radgraph_xl": 0.0026,
        "ratescore": 0.0595, "c_avg_pct": 6.93, "a_avg_pct": 2.93,
    },
    ("LLaVA-OV", "I&L&M"): {
        "rouge_l": 0.0441, "bertscore": 0.0280, "radgraph_xl": 0.0674,
        "ratescore": 0.0957, "c_avg_pct": 31.76, "a_avg_pct": 18.55,
    },
    ("Qwen2.5VL", "L&M"): {
        "rouge_l": -0.0149, "bertscore": -0.0147, "radgraph_xl": -0.0006,
        "ratescore": 0.0197, "c_avg_pct": 1.81, "a_avg_pct": -1.37,
    },
    ("Qwen2.5VL", "I&L&M"): {
        "rouge_l": 0.0038, "bertscore": -0.0035, "radgraph_xl": 0.0278,
        "ratescore": 0.0439, "c_avg_pct": 13.56, "a_avg_pct": 5.80,
    },
}

# Published blinded expert review: average clinically significant errors per
# generated report, for the five (model, method) arms that were reviewed.
EXPERT_ERROR_AVERAGES: tuple[tuple[str, str, float], ...] = (
    ("CXR-LLaVA", "L&M", 1.75),
    ("MAIRA2", "-", 1.75),
    ("LLaVA-OV", "I&L&M", 1.88),
    ("Qwen2.5VL", "I&L&M", 2.12),
    ("CXR-LLaVA", "-", 2.18),
)

# Published statistics of the fused 560-study corpus.
REFERENCE_CORPUS_STATS = {
    "n_images": 560,
    "n_reports": 1372,
    "avg_reports_per_image": 1372 / 560,  # prints as 2.45 at two decimals
    "n_missing_findings": 210,
    "n_missing_impression": 129,
    "avg_len_findings": 410.3,
    "avg_len_impression": 227.5,
    "avg_len_dictated": 243.7,
}


def reference_rows() -> list[MetricRow]:
    """The leaderboard as MetricRows, raw scores only (aggregates unset)."""
    return [
        MetricRow(
            model=model,
            method=method,
            scores={
                "rouge_l": rgl,
                "bertscore": bert,
                "radgraph_xl": radg,
                "ratescore": rate,
            },
        )
        for model, method, rgl, bert, radg, rate, _cavg, _aavg in REFERENCE_LEADERBOARD
    ]


def printed_c_avg(model: str, method: str) -> float:
    for row in REFERENCE_LEADERBOARD:
        if row[0] == model and row[1] == method:
            return row[6]
    raise KeyError((model, method))
