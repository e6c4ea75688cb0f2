"""Labeled corpus handling: manifest in, per-track features and genre summaries out."""

import csv
import enum
import io
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .audio_io import AudioBuffer, PreprocessSpec, decode_wav, preprocess
from .errors import VgmfeatError, TrackError
from .features import (
    PITCH_CLASSES,
    DEFAULT_TEMPO_RANGE_BPM,
    FrameSeries,
    chroma,
    mfcc,
    spectral_centroid,
    tempo_from_spectrogram,
    zero_crossing_rate,
)
from .spectral import StftParams, apply_filterbank, mel_filterbank, stft

MANIFEST_COLUMNS = ("path", "game", "genre", "title")


class GenreLabel(enum.IntEnum):
    """The three RPG sub-genre classes, with stable serialization codes."""

    ADVENTURE_RPG = 0
    ACTION_RPG = 1
    STRATEGY_RPG = 2

    @property
    def token(self) -> str:
        return self.name.lower()

    @classmethod
    def from_token(cls, text: str) -> "GenreLabel":
        try:
            return cls[text.strip().upper()]
        except KeyError:
            raise ValueError(f"unknown genre {text!r}") from None


@dataclass
class TrackRecord:
    path: str
    game: str
    genre: GenreLabel
    title: str


@dataclass
class TrackFeatures:
    """Aggregated per-track feature vector.

    Scalar aggregates use the arithmetic mean and population standard
    deviation over frames; mfcc_range is the per-coefficient max - min.
    """

    tempo_bpm: float
    zcr_mean: float
    zcr_std: float
    centroid_mean_hz: float
    centroid_std_hz: float
    chroma_mean: np.ndarray  # 12
    mfcc_mean: np.ndarray  # n_mfcc
    mfcc_range: np.ndarray  # n_mfcc

    def as_vector(self) -> np.ndarray:
        return np.concatenate(
            [
                [self.tempo_bpm, self.zcr_mean, self.zcr_std, self.centroid_mean_hz, self.centroid_std_hz],
                self.chroma_mean,
                self.mfcc_mean,
                self.mfcc_range,
            ]
        )

    @classmethod
    def from_vector(cls, vec: np.ndarray, n_mfcc: int = 13) -> "TrackFeatures":
        vec = np.asarray(vec, dtype=np.float64)
        if len(vec) != 17 + 2 * n_mfcc:
            raise ValueError(f"expected {17 + 2 * n_mfcc} scalars, got {len(vec)}")
        return cls(
            tempo_bpm=float(vec[0]),
            zcr_mean=float(vec[1]),
            zcr_std=float(vec[2]),
            centroid_mean_hz=float(vec[3]),
            centroid_std_hz=float(vec[4]),
            chroma_mean=vec[5:17].copy(),
            mfcc_mean=vec[17 : 17 + n_mfcc].copy(),
            mfcc_range=vec[17 + n_mfcc :].copy(),
        )


def feature_names(n_mfcc: int = 13) -> list:
    names = ["tempo_bpm", "zcr_mean", "zcr_std", "centroid_mean_hz", "centroid_std_hz"]
    names += [f"chroma_mean_{pc}" for pc in PITCH_CLASSES]
    names += [f"mfcc_mean_{i}" for i in range(n_mfcc)]
    names += [f"mfcc_range_{i}" for i in range(n_mfcc)]
    return names


@dataclass
class LabeledDataset:
    """Feature matrix plus labels and track ids, ready for classification."""

    matrix: np.ndarray  # n_tracks x n_features
    labels: np.ndarray  # n_tracks, GenreLabel codes
    track_ids: list
    feature_names: list

    def __len__(self) -> int:
        return self.matrix.shape[0]


@dataclass
class GenreSummary:
    """Element-wise per-genre statistics over track feature vectors."""

    genres: list  # GenreLabel, in code order
    track_counts: np.ndarray  # per genre
    mean: np.ndarray  # n_genres x n_features
    std: np.ndarray
    minimum: np.ndarray
    maximum: np.ndarray
    feature_names: list

    @property
    def range_width(self) -> np.ndarray:
        """Per-genre max - min of each feature, the cross-genre spread comparison."""
        return self.maximum - self.minimum


def load_manifest(text: str):
    """Parse manifest CSV (`path,game,genre,title`) into TrackRecords.

    Raises:
        ValueError: missing/misnamed columns, or a bad genre or empty path
            (the message names the offending row, header = row 1).
    """
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ValueError("manifest is empty, expected header path,game,genre,title") from None
    header = [h.strip().lower() for h in header]
    if header != list(MANIFEST_COLUMNS):
        raise ValueError(
            f"manifest header must be {','.join(MANIFEST_COLUMNS)}, got {','.join(header)}"
        )
    records = []
    for row_no, row in enumerate(reader, start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(MANIFEST_COLUMNS):
            raise ValueError(f"manifest row {row_no}: expected {len(MANIFEST_COLUMNS)} fields, got {len(row)}")
        path, game, genre_text, title = (cell.strip() for cell in row)
        if not path:
            raise ValueError(f"manifest row {row_no}: empty path")
        try:
            genre = GenreLabel.from_token(genre_text)
        except ValueError as exc:
            raise ValueError(f"manifest row {row_no}: {exc}") from None
        records.append(TrackRecord(path, game, genre, title))
    return records


def analyze_clip(
    buf: AudioBuffer,
    stft_params: StftParams | None = None,
    n_mfcc: int = 13,
    n_mels: int = 128,
    tempo_range: tuple = DEFAULT_TEMPO_RANGE_BPM,
):
    """Run every extractor on a preprocessed clip.

    Returns (TrackFeatures, series) where series maps feature kind to the
    per-frame FrameSeries behind each aggregate.
    """
    stft_params = stft_params or StftParams()
    mag = stft(buf, stft_params, kind="magnitude")
    power = mag.to_power()

    zcr = zero_crossing_rate(buf, stft_params.n_fft, stft_params.hop)
    cent = spectral_centroid(mag)
    chrom = chroma(power)
    bank = mel_filterbank(buf.sample_rate_hz, stft_params.n_fft, n_mels)
    ceps = mfcc(apply_filterbank(power, bank), n_mfcc, frame_rate_hz=power.frame_rate_hz)
    tempo = tempo_from_spectrogram(mag, tempo_range)

    feats = TrackFeatures(
        tempo_bpm=tempo.bpm,
        zcr_mean=float(zcr.values.mean()),
        zcr_std=float(zcr.values.std()),
        centroid_mean_hz=float(cent.values.mean()),
        centroid_std_hz=float(cent.values.std()),
        chroma_mean=chrom.values.mean(axis=1),
        mfcc_mean=ceps.values.mean(axis=1),
        mfcc_range=ceps.values.max(axis=1) - ceps.values.min(axis=1),
    )
    series = {
        "zcr": zcr,
        "centroid": cent,
        "chroma": chrom,
        "mfcc": ceps,
        "onset": FrameSeries(tempo.onset_envelope[None, :], "onset", mag.frame_rate_hz),
    }
    return feats, series


def extract_track(
    rec: TrackRecord,
    pre: PreprocessSpec | None = None,
    stft_params: StftParams | None = None,
    base_dir: str | None = None,
    n_mfcc: int = 13,
    n_mels: int = 128,
    tempo_range: tuple = DEFAULT_TEMPO_RANGE_BPM,
    pad_short: bool = False,
    return_series: bool = False,
):
    """Decode, preprocess and featurize one manifest record.

    Any failure is re-raised as TrackError carrying the track path and the
    pipeline stage that broke.
    """
    pre = pre or PreprocessSpec()
    path = Path(rec.path)
    if base_dir is not None and not path.is_absolute():
        path = Path(base_dir) / path

    stage = "read"
    try:
        data = path.read_bytes()
        stage = "decode"
        buf = decode_wav(data)
        stage = "preprocess"
        clip = preprocess(buf, pre, pad_short=pad_short)
        stage = "analyze"
        feats, series = analyze_clip(clip, stft_params, n_mfcc, n_mels, tempo_range)
    except (OSError, ValueError, VgmfeatError) as exc:
        raise TrackError(str(path), stage, exc) from exc
    return (feats, series) if return_series else feats


def summarize_by_genre(pairs) -> GenreSummary:
    """Per-genre element-wise mean/std/min/max over track feature vectors.

    `pairs` is a sequence of (TrackFeatures, GenreLabel). Only genres that
    appear are summarized, in code order.
    """
    pairs = list(pairs)
    if not pairs:
        raise ValueError("no tracks to summarize")
    vectors = np.array([f.as_vector() for f, _ in pairs])
    labels = np.array([int(g) for _, g in pairs])
    n_mfcc = (vectors.shape[1] - 17) // 2

    genres = [g for g in GenreLabel if np.any(labels == int(g))]
    stacked = [vectors[labels == int(g)] for g in genres]
    return GenreSummary(
        genres=genres,
        track_counts=np.array([len(block) for block in stacked]),
        mean=np.array([block.mean(axis=0) for block in stacked]),
        std=np.array([block.std(axis=0) for block in stacked]),
        minimum=np.array([block.min(axis=0) for block in stacked]),
        maximum=np.array([block.max(axis=0) for block in stacked]),
        feature_names=feature_names(n_mfcc),
    )


# ---------------------------------------------------------------------------
# serialization: feature table and genre summary, CSV and JSON
# floats are written with 9 significant digits so files are reproducible

def format_float(x: float) -> str:
    return format(float(x), ".9g")


def write_feature_table_csv(rows, n_mfcc: int = 13) -> str:
    """Render (track_id, TrackFeatures, GenreLabel) rows as the feature CSV."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["track_id"] + feature_names(n_mfcc) + ["genre"])
    for track_id, feats, genre in rows:
        vec = feats.as_vector()
        if len(vec) != 17 + 2 * n_mfcc:
            raise ValueError(f"track {track_id}: expected {17 + 2 * n_mfcc} features, got {len(vec)}")
        writer.writerow([track_id] + [format_float(v) for v in vec] + [genre.token])
    return out.getvalue()


def read_feature_table_csv(text: str) -> LabeledDataset:
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ValueError("feature table is empty") from None
    if len(header) < 3 or header[0] != "track_id" or header[-1] != "genre":
        raise ValueError("feature table header must be track_id,<features...>,genre")
    names = header[1:-1]
    ids, rows, labels = [], [], []
    for row_no, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise ValueError(f"feature table row {row_no}: expected {len(header)} fields, got {len(row)}")
        ids.append(row[0])
        rows.append([float(v) for v in row[1:-1]])
        labels.append(int(GenreLabel.from_token(row[-1])))
    matrix = np.array(rows, dtype=np.float64).reshape(len(rows), len(names))
    return LabeledDataset(matrix, np.array(labels, dtype=int), ids, names)


def feature_table_json(rows, n_mfcc: int = 13) -> str:
    """JSON mirror of the feature CSV: one object per track, same columns."""
    names = feature_names(n_mfcc)
    entries = []
    for track_id, feats, genre in rows:
        entry = {"track_id": track_id}
        entry.update({name: float(v) for name, v in zip(names, feats.as_vector())})
        entry["genre"] = genre.token
        entries.append(entry)
    return json.dumps(entries, indent=2) + "\n"


def write_genre_summary_csv(summary: GenreSummary) -> str:
    """One row per genre; columns carry <feature>_<stat> for all five stats."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    header = ["genre", "track_count"]
    for name in summary.feature_names:
        header += [f"{name}_{stat}" for stat in ("mean", "std", "min", "max", "range")]
    writer.writerow(header)
    ranges = summary.range_width
    for i, genre in enumerate(summary.genres):
        row = [genre.token, str(int(summary.track_counts[i]))]
        for j in range(len(summary.feature_names)):
            row += [
                format_float(summary.mean[i, j]),
                format_float(summary.std[i, j]),
                format_float(summary.minimum[i, j]),
                format_float(summary.maximum[i, j]),
                format_float(ranges[i, j]),
            ]
        writer.writerow(row)
    return out.getvalue()


def frame_series_csv(series: FrameSeries) -> str:
    """Plot-ready CSV for one per-frame series: frame index, then one value column per row."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    d = series.values.shape[0]
    if series.feature_kind == "chroma" and d == 12:
        cols = [f"chroma_{pc}" for pc in PITCH_CLASSES]
    elif d == 1:
        cols = [series.feature_kind]
    else:
        cols = [f"{series.feature_kind}_{i}" for i in range(d)]
    writer.writerow(["frame"] + cols)
    for t in range(series.n_frames):
        writer.writerow([str(t)] + [format_float(v) for v in series.values[:, t]])
    return out.getvalue()


FEATURE_FAMILIES = {
    "tempo": ("tempo_bpm",),
    "zcr": ("zcr_",),
    "centroid": ("centroid_",),
    "chroma": ("chroma_",),
    "mfcc": ("mfcc_",),
    "mfcc_mean": ("mfcc_mean_",),
    "mfcc_range": ("mfcc_range_",),
}


def select_features(ds: LabeledDataset, families) -> LabeledDataset:
    """Restrict a dataset to the named feature families (see FEATURE_FAMILIES)."""
    unknown = [f for f in families if f not in FEATURE_FAMILIES]
    if unknown:
        raise ValueError(f"unknown feature families {unknown}, expected {sorted(FEATURE_FAMILIES)}")
    prefixes = tuple(p for f in families for p in FEATURE_FAMILIES[f])
    keep = [i for i, name in enumerate(ds.feature_names) if name.startswith(prefixes)]
    if not keep:
        raise ValueError(f"feature selection {list(families)} matches no columns")
    return LabeledDataset(
        ds.matrix[:, keep],
        ds.labels.copy(),
        list(ds.track_ids),
        [ds.feature_names[i] for i in keep],
    )
