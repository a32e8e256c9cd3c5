"""Shared fixtures: a planted synthetic corpus with known ground truth.

The generator builds ~500 patent records from three disjoint vocabularies
(50/30/20 percent of the corpus) and assigns labels via stored logits. One
(label, vocabulary) cell grows roughly linearly over the window while every
other cell stays flat, so tests know exactly which topics, shares, and
opportunities a correct pipeline must recover.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from datetime import date, timedelta
from pathlib import Path

import numpy as np
import pytest

WINDOW = (2019, 2023)
SEED = 7

DATA_DIR = Path(__file__).parent / "data"

# One pass/fail line per acceptance criterion, echoed in the terminal
# summary so the verdicts survive pytest's output capturing.
ACCEPTANCE_LINES: list[str] = []


def record_acceptance(number: int, name: str, passed: bool, detail: str = "") -> None:
    status = "PASS" if passed else "FAIL"
    line = f"[acceptance {number}] {name}: {status}"
    if detail:
        line += f" ({detail})"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

VOCAB_A = (
    "camera", "sensor", "pixel", "lens", "optical", "image", "detection",
    "tracking", "frame", "resolution", "infrared", "scanning", "focus",
    "exposure", "aperture", "filter", "brightness", "contrast",
    "segmentation", "calibration", "shutter", "zoom", "panorama", "stereo",
    "projection", "autofocus", "telephoto", "luminance", "chroma", "raster",
)
VOCAB_B = (
    "audio", "speech", "microphone", "acoustic", "phoneme", "transcription",
    "voice", "utterance", "spectrogram", "frequency", "amplitude",
    "waveform", "echo", "cadence", "prosody", "syllable", "diction",
    "vocal", "timbre", "pitch", "resonance", "doppler", "harmonics",
    "intonation", "loudness", "murmur", "sonic", "whisper", "babble",
    "playback",
)
VOCAB_C = (
    "silicon", "wafer", "transistor", "circuit", "voltage", "capacitor",
    "resistor", "semiconductor", "lithography", "substrate", "gate",
    "interconnect", "soldering", "thermal", "heatsink", "clock", "register",
    "cache", "fabrication", "doping", "etching", "packaging", "socket",
    "chipset", "oscillator", "amperage", "conductor", "insulator", "anode",
    "cathode",
)

VOCABULARIES = {"A": VOCAB_A, "B": VOCAB_B, "C": VOCAB_C}

# (label, vocabulary group) -> yearly counts over WINDOW. The Vision x A
# series follows 2 + 3t with small noise; every other cell is flat.
PLANTED_CELLS = {
    ("Vision", "A"): (6, 7, 11, 15, 16),
    ("Hardware", "A"): (20, 20, 20, 20, 20),
    ("ML", "A"): (19, 19, 19, 19, 19),
    ("Speech", "B"): (15, 15, 15, 15, 15),
    ("NLP", "B"): (15, 15, 15, 15, 15),
    ("ML", "C"): (10, 10, 10, 10, 10),
    ("Hardware", "C"): (10, 10, 10, 10, 10),
}

GROWING_CELL = ("Vision", "A")

LABEL_ORDER = ("Hardware", "ML", "NLP", "Speech", "Vision")

# Planted corpus proportions by vocabulary group.
GROUP_SHARES = {"A": 50.0, "B": 30.0, "C": 20.0}


@dataclass(frozen=True)
class PlantedDoc:
    application_id: str
    label: str
    group: str
    year: int


@dataclass(frozen=True)
class PlantedDataset:
    corpus_path: Path
    logits_path: Path
    docs: tuple[PlantedDoc, ...]

    @property
    def total(self) -> int:
        return len(self.docs)

    def group_of(self) -> dict[str, str]:
        return {d.application_id: d.group for d in self.docs}


def _sample_words(rng: np.random.Generator, vocab: tuple[str, ...], count: int) -> list[str]:
    # Zipf-ish weights concentrate mass on the first few vocabulary words so
    # documents from one group stay lexically close to each other.
    weights = 1.0 / np.arange(2, len(vocab) + 2)
    weights /= weights.sum()
    return list(rng.choice(vocab, size=count, p=weights))


def _compose_text(rng: np.random.Generator, vocab: tuple[str, ...]) -> tuple[str, str]:
    title_words = _sample_words(rng, vocab, 3)
    body_words = _sample_words(rng, vocab, 9)
    title = f"The {title_words[0]} {title_words[1]} {title_words[2]}"
    abstract = (
        f"A {body_words[0]} for the {body_words[1]} of the {body_words[2]} "
        f"and the {body_words[3]} with the {body_words[4]} in the "
        f"{body_words[5]} {body_words[6]} {body_words[7]} {body_words[8]}."
    )
    return title, abstract


def build_planted_dataset(directory: Path, seed: int = SEED) -> PlantedDataset:
    """Write corpus.csv and logits.jsonl for the planted corpus."""
    rng = np.random.default_rng(seed)
    label_index = {name: i for i, name in enumerate(LABEL_ORDER)}
    years = list(range(WINDOW[0], WINDOW[1] + 1))

    docs: list[PlantedDoc] = []
    rows: list[dict] = []
    logits_rows: list[dict] = []
    doc_number = 0
    for (label, group), series in PLANTED_CELLS.items():
        for year, cell_count in zip(years, series):
            for _ in range(cell_count):
                doc_number += 1
                app_id = f"APP{doc_number:05d}"
                title, abstract = _compose_text(rng, VOCABULARIES[group])
                filing = date(year, int(rng.integers(1, 13)), int(rng.integers(1, 28)))
                granted = filing + timedelta(days=int(rng.integers(200, 900)))
                rows.append(
                    {
                        "application_id": app_id,
                        "patent_id": f"P{doc_number:05d}",
                        "filing_date": filing.isoformat(),
                        "patent_date": granted.isoformat(),
                        "patent_title": title,
                        "patent_abstract": abstract,
                    }
                )
                logits = rng.normal(0.0, 0.3, size=len(LABEL_ORDER))
                logits[label_index[label]] += 6.0
                logits_rows.append(
                    {"application_id": app_id, "logits": [float(v) for v in logits]}
                )
                docs.append(PlantedDoc(app_id, label, group, year))

    directory.mkdir(parents=True, exist_ok=True)
    corpus_path = directory / "corpus.csv"
    with corpus_path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.DictWriter(
            handle,
            fieldnames=[
                "application_id",
                "patent_id",
                "filing_date",
                "patent_date",
                "patent_title",
                "patent_abstract",
            ],
            lineterminator="\n",
        )
        writer.writeheader()
        writer.writerows(rows)

    logits_path = directory / "logits.jsonl"
    with logits_path.open("w", encoding="utf-8") as handle:
        for row in logits_rows:
            handle.write(json.dumps(row) + "\n")

    return PlantedDataset(corpus_path, logits_path, tuple(docs))


@pytest.fixture(scope="session")
def planted_dataset(tmp_path_factory) -> PlantedDataset:
    return build_planted_dataset(tmp_path_factory.mktemp("planted"))


def planted_run_config(dataset: PlantedDataset, out_dir: Path):
    """RunConfig pointing at the planted corpus with the offline providers."""
    from techscout.config import RunConfig

    return RunConfig(
        input_path=str(dataset.corpus_path),
        input_format="csv",
        scorer_kind="stored",
        scorer_path=str(dataset.logits_path),
        window=WINDOW,
        seed=SEED,
        use_chat=False,
        out_dir=str(out_dir),
    )


@pytest.fixture(scope="session")
def planted_run(planted_dataset, tmp_path_factory):
    """One full pipeline run over the planted corpus (reused across tests)."""
    from techscout.pipeline import run_pipeline

    out_dir = tmp_path_factory.mktemp("planted-run")
    config = planted_run_config(planted_dataset, out_dir)
    report = run_pipeline(config)
    return {"config": config, "report": report, "out_dir": out_dir}
