"""Corpus handling: tokenization, TSV ingestion, vocabulary construction,
stratified splitting, and a seeded synthetic code-mix generator that stands in
for hand-written Hinglish corpora at desk scale."""

from __future__ import annotations

import math
import unicodedata
from dataclasses import dataclass, field

from .errors import ArgumentError, DataError, ParseError
from .numerics import RngStream

INTENT_LABELS = (
    "SearchCreativeWork",
    "GetWeather",
    "BookRestaurant",
    "PlayMusic",
    "AddToPlaylist",
    "RateBook",
    "SearchScreeningEvent",
)


def _is_punct(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P")


def tokenize(text: str) -> list[str]:
    """Lowercase, split on Unicode whitespace, and strip leading/trailing
    punctuation from each piece; pieces reduced to nothing are dropped.

    Total function: never raises on valid str input. Devanagari (and any
    caseless script) passes through unchanged.
    """
    tokens = []
    for piece in text.lower().split():
        start, end = 0, len(piece)
        while start < end and _is_punct(piece[start]):
            start += 1
        while end > start and _is_punct(piece[end - 1]):
            end -= 1
        if end > start:
            tokens.append(piece[start:end])
    return tokens


@dataclass(frozen=True)
class Utterance:
    """One user message; ``tokens`` is derived from ``text`` at construction."""

    text: str
    tokens: tuple[str, ...] = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.tokens is None:
            object.__setattr__(self, "tokens", tuple(tokenize(self.text)))


@dataclass(frozen=True)
class LabeledDataset:
    """Ordered (utterance, label) records plus the sorted distinct label set."""

    records: tuple[tuple[Utterance, str], ...]
    labels: tuple[str, ...] = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        records = tuple(self.records)
        object.__setattr__(self, "records", records)
        seen = sorted({y for _, y in records})
        if self.labels is None:
            object.__setattr__(self, "labels", tuple(seen))
        else:
            object.__setattr__(self, "labels", tuple(self.labels))
            missing = set(seen) - set(self.labels)
            if missing:
                raise DataError(f"records use labels outside the label set: {sorted(missing)}")

    @classmethod
    def from_pairs(cls, pairs) -> "LabeledDataset":
        return cls(tuple((Utterance(text), label) for text, label in pairs))

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def subset(self, indices) -> "LabeledDataset":
        return LabeledDataset(tuple(self.records[i] for i in indices), labels=self.labels)

    def label_column(self) -> list[str]:
        return [y for _, y in self.records]

    def to_tsv(self) -> str:
        return "".join(f"{y}\t{u.text}\n" for u, y in self.records)


def load_dataset(path) -> LabeledDataset:
    """Read a ``label<TAB>text`` TSV (UTF-8, no header, one record per
    nonempty line); duplicates are retained and record order is file order."""
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n").rstrip("\r")
            if line == "":
                continue
            label, sep, text = line.partition("\t")
            if not sep:
                raise ParseError("expected 'label<TAB>text'", line=lineno)
            if not label:
                raise ParseError("empty label", line=lineno)
            records.append((Utterance(text), label))
    if not records:
        raise DataError(f"empty dataset: {path}")
    return LabeledDataset(tuple(records))


def save_dataset(ds: LabeledDataset, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(ds.to_tsv())


def stratified_split(ds: LabeledDataset, test_fraction: float, seed: int):
    """Split into (train, test) with per-class test counts of
    round-half-up(class_count * fraction); selection within a class is a
    seeded shuffle, independent across classes.

    If the per-class roundings miss the global round-half-up target, the
    largest class is adjusted by one record toward it.
    """
    if not 0.0 <= test_fraction < 1.0:
        raise ArgumentError(f"test_fraction must be in [0, 1), got {test_fraction}")
    by_class: dict[str, list[int]] = {}
    for i, (_, label) in enumerate(ds.records):
        by_class.setdefault(label, []).append(i)
    labels = sorted(by_class)
    counts = {y: int(math.floor(len(by_class[y]) * test_fraction + 0.5)) for y in labels}
    target = int(math.floor(len(ds) * test_fraction + 0.5))
    gap = target - sum(counts.values())
    if gap != 0 and labels:
        largest = max(labels, key=lambda y: (len(by_class[y]), ))
        step = 1 if gap > 0 else -1
        counts[largest] = min(max(counts[largest] + step, 0), len(by_class[largest]))
    test_idx: list[int] = []
    base = RngStream(seed)
    for y in labels:
        members = list(by_class[y])
        base.derive("split", y).shuffle(members)
        test_idx.extend(members[: counts[y]])
    test_set = set(test_idx)
    train_idx = [i for i in range(len(ds)) if i not in test_set]
    return ds.subset(train_idx), ds.subset(sorted(test_idx))


@dataclass
class Vocabulary:
    """Token -> dense index map with per-token document frequencies."""

    index: dict[str, int]
    df: dict[str, int]
    n_docs: int

    def __len__(self) -> int:
        return len(self.index)

    def __contains__(self, token: str) -> bool:
        return token in self.index

    def get(self, token: str):
        return self.index.get(token)


def build_vocabulary(ds: LabeledDataset, min_df: int = 1) -> Vocabulary:
    """Vocabulary over all tokens with document frequency >= min_df; indices
    follow first occurrence order."""
    if min_df < 1:
        raise ArgumentError("min_df must be >= 1")
    order: list[str] = []
    seen: set[str] = set()
    df: dict[str, int] = {}
    for utterance, _ in ds.records:
        for token in utterance.tokens:
            if token not in seen:
                seen.add(token)
                order.append(token)
        for token in set(utterance.tokens):
            df[token] = df.get(token, 0) + 1
    kept = [t for t in order if df[t] >= min_df]
    return Vocabulary(
        index={t: i for i, t in enumerate(kept)},
        df={t: df[t] for t in kept},
        n_docs=len(ds),
    )


# ---------------------------------------------------------------------------
# Synthetic code-mix generation
# ---------------------------------------------------------------------------

_FILLERS = {
    "creative": (
        "the secret", "the alchemist", "wings of fire", "harry potter",
        "midnight's children", "the white tiger", "train to pakistan", "gitanjali",
    ),
    "movie": (
        "sholay", "dangal", "inception", "lagaan", "3 idiots", "pathaan",
        "war", "avatar",
    ),
    "artist": (
        "arijit singh", "kishore kumar", "lata mangeshkar", "shreya ghoshal",
        "honey singh", "badshah", "neha kakkar", "ar rahman",
    ),
    "song": (
        "tum hi ho", "channa mereya", "kal ho naa ho", "kesariya",
        "apna time aayega", "despacito", "senorita", "shape of you",
    ),
    "playlist": (
        "workout", "road trip", "monsoon", "chill", "party", "study",
        "retro", "bollywood hits",
    ),
    "city": (
        "mumbai", "delhi", "pune", "jaipur", "goa", "bangalore", "lucknow",
        "chennai",
    ),
    "cuisine": (
        "chinese", "italian", "south indian", "punjabi", "thai", "mexican",
        "mughlai", "gujarati",
    ),
    "num": ("2", "3", "4", "5"),
    "den": ("5", "6", "10"),
    "people": ("2", "3", "4", "5", "6", "7"),
    "time": ("aaj raat", "kal shaam", "sunday", "8 baje", "friday night", "lunch time"),
}

_TEMPLATES = {
    "SearchCreativeWork": (
        "mujhe {creative} wali book dhundo",
        "{creative} naam ki kitab search karo",
        "kya aap {creative} dhund sakte ho",
        "find karo {creative} please",
        "{creative} ka page dikhao mujhe",
        "bhai {creative} kahan milegi",
        "show karo {creative} wala novel",
    ),
    "GetWeather": (
        "kal {city} mein mausam kaisa rahega",
        "{city} ka weather batao",
        "kya {city} mein barish hogi {time}",
        "aaj {city} ka temperature kya hai",
        "mausam ka haal batao {city} ka",
        "{time} ko {city} mein thand hogi kya",
        "weather forecast chahiye {city} ke liye",
    ),
    "BookRestaurant": (
        "{cuisine} restaurant mein table book karo {people} logo ke liye",
        "mujhe {time} ke liye {cuisine} khana book karna hai",
        "{people} log ke liye reservation karo {cuisine} place par",
        "koi accha {cuisine} restaurant book kar do",
        "table chahiye {people} logo ki {time}",
        "{city} mein {cuisine} restaurant reserve karo",
    ),
    "PlayMusic": (
        "{artist} ka gaana bajao",
        "play karo {song} abhi",
        "mujhe {song} sunna hai",
        "{artist} ke songs chalao",
        "bajao {song} zara",
        "music chalao {artist} wala",
        "{song} play karo na yaar",
    ),
    "AddToPlaylist": (
        "{song} ko meri {playlist} playlist mein daal do",
        "add karo {song} {playlist} list mein",
        "meri {playlist} playlist mein {artist} ka gaana daalo",
        "{song} save karo {playlist} ke andar",
        "playlist {playlist} mein {song} add kar do",
        "daal do {artist} ke gaane {playlist} mein",
    ),
    "RateBook": (
        "{creative} ko {num} star do",
        "is kitab {creative} ko {num} out of {den} rating do",
        "rate karo {creative} ko {num} points",
        "{creative} novel ko main {num} stars dunga",
        "give {creative} ek {num} ki rating",
        "{num} star banta hai {creative} ke liye",
    ),
    "SearchScreeningEvent": (
        "{movie} kahan chal rahi hai",
        "{movie} ke show timings batao",
        "kya {movie} cinema mein lagi hai",
        "{city} mein {movie} ka show dikhao",
        "movie {movie} ki screening dhundo",
        "{movie} dekhne ka plan hai shows batao",
        "konsa theatre dikha raha hai {movie}",
    ),
}

_SPELLINGS = {
    "kya": ("kya", "kia", "kyaa"),
    "hai": ("hai", "h", "he"),
    "mein": ("mein", "me", "mai"),
    "karo": ("karo", "kro"),
    "mujhe": ("mujhe", "mujhko", "muje"),
    "batao": ("batao", "btao"),
    "gaana": ("gaana", "gana"),
    "gaane": ("gaane", "gane"),
    "dhundo": ("dhundo", "dhundho", "dundo"),
    "chahiye": ("chahiye", "chaiye", "chahie"),
    "rahega": ("rahega", "rhega"),
    "kaisa": ("kaisa", "kesa"),
    "kahan": ("kahan", "kaha", "khan"),
    "bajao": ("bajao", "bajaao"),
    "accha": ("accha", "acha", "achha"),
    "dikhao": ("dikhao", "dikha"),
    "raha": ("raha", "rha"),
    "rahi": ("rahi", "rhi"),
    "mausam": ("mausam", "mosam"),
    "logo": ("logo", "logon"),
    "zara": ("zara", "jara"),
    "yaar": ("yaar", "yar"),
}

_TAILS = ("", "", "", "?", "!", "...", "??", " please", " jaldi")


def _fill_template(template: str, rng: RngStream) -> str:
    out = template
    for slot, options in _FILLERS.items():
        while "{" + slot + "}" in out:
            out = out.replace("{" + slot + "}", rng.choice(options), 1)
    return out


def generate_codemix(seed: int, n_per_intent: int) -> LabeledDataset:
    """Balanced synthetic Hinglish corpus: for each of the 7 intents, emit
    ``n_per_intent`` utterances built from per-intent templates with English
    slot fillers, romanized-Hindi function words, and seeded spelling
    variation. Deterministic under ``seed``."""
    if n_per_intent < 1:
        raise ArgumentError("n_per_intent must be >= 1")
    rng = RngStream(seed).derive("codemix")
    records = []
    for label in INTENT_LABELS:
        templates = _TEMPLATES[label]
        for _ in range(n_per_intent):
            text = _fill_template(rng.choice(templates), rng)
            words = []
            for word in text.split():
                variants = _SPELLINGS.get(word)
                words.append(rng.choice(variants) if variants else word)
            text = " ".join(words) + rng.choice(_TAILS)
            records.append((Utterance(text), label))
    return LabeledDataset(tuple(records))
