"""MIT-BIH WFDB readers: header (.hea), format-212 signal (.dat), annotations (.atr).

Only the subset of the WFDB conventions that the MIT-BIH arrhythmia database
actually uses is supported: two-signal format-212 records sampled at 360 Hz
with MIT-format annotation files.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path

import numpy as np

from .errors import (
    ParseError,
    RangeError,
    SelectionError,
    TruncatedSignal,
    UnsupportedFormat,
)

# The 48 records of the MIT-BIH arrhythmia database.
MITBIH_RECORDS = [
    "100", "101", "102", "103", "104", "105", "106", "107",
    "108", "109", "111", "112", "113", "114", "115", "116",
    "117", "118", "119", "121", "122", "123", "124", "200",
    "201", "202", "203", "205", "207", "208", "209", "210",
    "212", "213", "214", "215", "217", "219", "220", "221",
    "222", "223", "228", "230", "231", "232", "233", "234",
]

# Dropped for poor signal quality (AAMI recommendation).
EXCLUDED_RECORDS = frozenset({"102", "104", "107", "217"})

LEAD_NAME = "MLII"

# MIT annotation type codes -> display symbols (subset of the standard table;
# anything unlisted is reported as "?<code>").
ANNOTATION_SYMBOLS = {
    1: "N", 2: "L", 3: "R", 4: "a", 5: "V", 6: "F", 7: "J", 8: "A",
    9: "S", 10: "E", 11: "j", 12: "/", 13: "Q", 14: "~", 16: "|",
    18: "s", 19: "T", 20: "*", 21: "D", 22: '"', 23: "=", 24: "p",
    25: "B", 26: "^", 27: "t", 28: "+", 29: "u", 30: "?", 31: "!",
    32: "[", 33: "]", 34: "e", 35: "n", 36: "#", 37: "x", 38: "f",
}

# Pseudo-annotation codes: consumed while parsing, never emitted.
_SKIP, _NUM, _SUB, _CHN, _AUX = 59, 60, 61, 62, 63


class BeatClass(IntEnum):
    """The five target classes with their fixed ids."""

    NOR = 0
    LBBB = 1
    RBBB = 2
    APC = 3
    PVC = 4

    @property
    def code(self) -> str:
        return _CLASS_TO_CODE[self]


BEAT_CODE_TO_CLASS = {
    "N": BeatClass.NOR,
    "L": BeatClass.LBBB,
    "R": BeatClass.RBBB,
    "A": BeatClass.APC,
    "V": BeatClass.PVC,
}
_CLASS_TO_CODE = {v: k for k, v in BEAT_CODE_TO_CLASS.items()}


@dataclass(frozen=True)
class SignalSpec:
    file_name: str
    format_code: int
    gain: float
    adc_zero: int
    description: str


@dataclass(frozen=True)
class RecordHeader:
    record_name: str
    num_signals: int
    sampling_frequency: int
    num_samples: int
    signals: tuple[SignalSpec, ...]


@dataclass(frozen=True)
class BeatAnnotation:
    sample_index: int
    code: str


@dataclass(frozen=True)
class EcgRecord:
    header: RecordHeader
    channels: tuple[np.ndarray, ...]  # millivolts, float64
    annotations: tuple[BeatAnnotation, ...]

    @property
    def name(self) -> str:
        return self.header.record_name


@dataclass(frozen=True)
class BeatRef:
    """One selected beat: which record/channel it lives in and its annotation."""

    record: EcgRecord = field(repr=False)
    channel: int
    annotation: BeatAnnotation

    @property
    def label(self) -> BeatClass:
        return BEAT_CODE_TO_CLASS[self.annotation.code]


def parse_header(text: str) -> RecordHeader:
    """Parse a WFDB .hea file. Only format-212 signal lines are accepted."""
    lines = [
        ln.strip() for ln in text.splitlines()
        if ln.strip() and not ln.lstrip().startswith("#")
    ]
    if not lines:
        raise ParseError("empty header")

    fields = lines[0].split()
    if len(fields) < 4:
        raise ParseError(f"line 1: expected 'name nsig fs nsamp', got {lines[0]!r}")
    try:
        record_name = fields[0].split("/")[0]
        num_signals = int(fields[1])
        # fs may carry counter-frequency suffixes: "360/..." or "360(0)"
        fs_tok = fields[2].split("/")[0].split("(")[0]
        sampling_frequency = int(float(fs_tok))
        num_samples = int(fields[3])
    except ValueError as e:
        raise ParseError(f"line 1: {e}") from e
    if num_signals <= 0:
        raise ParseError(f"line 1: non-positive signal count {num_signals}")
    if num_samples <= 0:
        raise ParseError(f"line 1: non-positive sample count {num_samples}")

    if len(lines) - 1 < num_signals:
        raise ParseError(
            f"header declares {num_signals} signals but has {len(lines) - 1} signal lines"
        )

    signals = []
    for i in range(num_signals):
        toks = lines[1 + i].split()
        lineno = 2 + i
        if len(toks) < 3:
            raise ParseError(f"line {lineno}: short signal line {lines[1 + i]!r}")
        try:
            # format token may carry xN/:N/+N modifiers; take the leading int
            fmt = int("".join(c for c in toks[1] if c.isdigit() or c == "-") or toks[1])
        except ValueError as e:
            raise ParseError(f"line {lineno}: bad format token {toks[1]!r}") from e
        if fmt != 212:
            raise UnsupportedFormat(
                f"line {lineno}: signal format {fmt} (only 212 supported)"
            )
        try:
            gain = float(toks[2].split("(")[0].split("/")[0])
        except ValueError as e:
            raise ParseError(f"line {lineno}: bad gain {toks[2]!r}") from e
        if gain == 0:
            gain = 200.0  # WFDB default when gain is unspecified
        adc_zero = int(toks[4]) if len(toks) > 4 else 0
        description = " ".join(toks[8:]) if len(toks) > 8 else f"sig{i}"
        signals.append(SignalSpec(toks[0], fmt, gain, adc_zero, description))

    return RecordHeader(
        record_name=record_name,
        num_signals=num_signals,
        sampling_frequency=sampling_frequency,
        num_samples=num_samples,
        signals=tuple(signals),
    )


def decode_format212(data: bytes, num_samples: int) -> tuple[np.ndarray, np.ndarray]:
    """Unpack two interleaved 12-bit channels from format-212 bytes.

    Each 3-byte group holds two samples:
      s1 = b0 | ((b1 & 0x0F) << 8),  s2 = b2 | ((b1 & 0xF0) << 4)
    both sign-extended from 12 bits. Returns raw ADC counts (int16).
    """
    needed = -(-num_samples * 2 * 12 // 8)  # ceil
    if len(data) < needed:
        raise TruncatedSignal(
            f"format-212 file too short: need {needed} bytes for "
            f"{num_samples} samples/channel, got {len(data)}"
        )
    n_groups = num_samples  # one group per sample pair
    buf = np.frombuffer(data, dtype=np.uint8, count=3 * n_groups)
    b0 = buf[0::3].astype(np.int32)
    b1 = buf[1::3].astype(np.int32)
    b2 = buf[2::3].astype(np.int32)
    s1 = b0 | ((b1 & 0x0F) << 8)
    s2 = b2 | ((b1 & 0xF0) << 4)
    s1 -= (s1 & 0x800) << 1  # sign-extend from bit 11
    s2 -= (s2 & 0x800) << 1
    return s1.astype(np.int16), s2.astype(np.int16)


def encode_format212(ch1: np.ndarray, ch2: np.ndarray) -> bytes:
    """Inverse of decode_format212 (used by tests and the synthetic writer)."""
    if len(ch1) != len(ch2):
        raise ParseError("format-212 channels must have equal length")
    a = np.asarray(ch1, dtype=np.int32) & 0xFFF
    b = np.asarray(ch2, dtype=np.int32) & 0xFFF
    out = np.empty(3 * len(a), dtype=np.uint8)
    out[0::3] = a & 0xFF
    out[1::3] = ((a >> 8) & 0x0F) | (((b >> 8) & 0x0F) << 4)
    out[2::3] = b & 0xFF
    return out.tobytes()


def parse_annotations(data: bytes, num_samples: int | None = None) -> tuple[BeatAnnotation, ...]:
    """Parse a MIT-format .atr byte stream into beat annotations.

    Words are 2-byte little-endian; top 6 bits are the type code, bottom 10
    the sample-index increment. SKIP/NUM/SUB/CHN/AUX pseudo-annotations are
    consumed without being emitted. The stream ends with a zero word.
    """
    out: list[BeatAnnotation] = []
    pos = 0
    sample = 0
    pending_skip = 0
    terminated = False
    while pos + 2 <= len(data):
        word = data[pos] | (data[pos + 1] << 8)
        pos += 2
        code = word >> 10
        interval = word & 0x3FF
        if word == 0:
            terminated = True
            break
        if code == _SKIP:
            if pos + 4 > len(data):
                raise ParseError("truncated SKIP annotation")
            high = data[pos] | (data[pos + 1] << 8)
            low = data[pos + 2] | (data[pos + 3] << 8)
            pos += 4
            skip = (high << 16) | low
            if skip >= 1 << 31:
                skip -= 1 << 32
            pending_skip += skip
        elif code == _AUX:
            n = interval + (interval & 1)  # aux strings are padded to even
            if pos + n > len(data):
                raise ParseError("truncated AUX annotation")
            pos += n
        elif code in (_NUM, _SUB, _CHN):
            pass  # state modifiers for readers we do not need
        else:
            sample += interval + pending_skip
            pending_skip = 0
            if num_samples is not None and not (0 <= sample < num_samples):
                raise RangeError(
                    f"annotation at sample {sample} outside record of {num_samples} samples"
                )
            out.append(BeatAnnotation(sample, ANNOTATION_SYMBOLS.get(code, f"?{code}")))
    if not terminated:
        raise ParseError("annotation stream missing zero terminator")
    return tuple(out)


def encode_annotations(annotations) -> bytes:
    """Inverse of parse_annotations for {symbol in ANNOTATION_SYMBOLS} codes."""
    sym_to_code = {v: k for k, v in ANNOTATION_SYMBOLS.items()}
    chunks = []
    prev = 0
    for ann in annotations:
        code = sym_to_code[ann.code]
        inc = ann.sample_index - prev
        if inc < 0:
            raise ParseError("annotations must be in increasing sample order")
        if inc > 0x3FF:
            chunks.append(int.to_bytes(_SKIP << 10, 2, "little"))
            chunks.append(int.to_bytes((inc >> 16) & 0xFFFF, 2, "little"))
            chunks.append(int.to_bytes(inc & 0xFFFF, 2, "little"))
            inc = 0
        chunks.append(int.to_bytes((code << 10) | inc, 2, "little"))
        prev = ann.sample_index
    chunks.append(b"\x00\x00")
    return b"".join(chunks)


def load_record(data_dir: str | Path, name: str) -> EcgRecord:
    """Load one record's header, signals (converted to mV), and annotations."""
    data_dir = Path(data_dir)
    header = parse_header((data_dir / f"{name}.hea").read_text())
    if header.num_signals != 2:
        raise ParseError(
            f"record {name}: expected 2 signals, header declares {header.num_signals}"
        )
    raw1, raw2 = decode_format212(
        (data_dir / f"{name}.dat").read_bytes(), header.num_samples
    )
    channels = []
    for spec, raw in zip(header.signals, (raw1, raw2)):
        channels.append((raw.astype(np.float64) - spec.adc_zero) / spec.gain)
    annotations = parse_annotations(
        (data_dir / f"{name}.atr").read_bytes(), header.num_samples
    )
    return EcgRecord(header, tuple(channels), annotations)


def discover_records(data_dir: str | Path) -> list[str]:
    """Record names present in a directory, by globbing *.hea."""
    return sorted(p.stem for p in Path(data_dir).glob("*.hea"))


def select_dataset(records) -> list[BeatRef]:
    """Build the flat beat index used by the paper's protocol.

    Drops records 102/104/107/217, keeps only the MLII channel, and keeps
    only annotations coded N/L/R/A/V. Beats with any other code are dropped
    silently.
    """
    index: list[BeatRef] = []
    for rec in records:
        if rec.name in EXCLUDED_RECORDS:
            continue
        descriptions = [s.description for s in rec.header.signals]
        if LEAD_NAME not in descriptions:
            raise SelectionError(
                f"record {rec.name} has no {LEAD_NAME} channel (leads: {descriptions})"
            )
        channel = descriptions.index(LEAD_NAME)
        for ann in rec.annotations:
            if ann.code in BEAT_CODE_TO_CLASS:
                index.append(BeatRef(rec, channel, ann))
    return index


def class_counts(index) -> dict[str, int]:
    counts = {cls.name: 0 for cls in BeatClass}
    for ref in index:
        counts[ref.label.name] += 1
    return counts
