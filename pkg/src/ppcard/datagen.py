"""Synthetic voter-style datasets with ground truth and controlled corruption.

Entities carry given name, surname, suburb, postcode and gender; duplicates
optionally receive random character edits (insert/delete/substitute/
transpose) on string attributes so that the clean / 20% / 40% corruption
regimes can be generated on demand. Entity ids are evaluation-only.
"""

from __future__ import annotations

import csv
import json
import string
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .encoding import PlainRecord, RecordSchema

# Short attribute values keep the per-record token count low enough that the
# default 200-bit / 20-hash encoding stays well below saturation, so distinct
# entities remain separable in Bloom filter space.
GIVEN_NAMES = [
    "amy", "ann", "ava", "ben", "cal", "dan", "eva", "eli", "fay", "gus",
    "ian", "ida", "jay", "jim", "joe", "kay", "kim", "lee", "leo", "liv",
    "lou", "mae", "max", "mia", "ned", "nia", "ora", "pam", "ray", "rex",
    "ron", "roy", "sam", "sal", "sid", "sue", "ted", "tim", "tom", "una",
    "val", "vic", "wes", "zoe", "abe", "ada", "art", "bea", "cleo", "cole",
    "cora", "dale", "dean", "dora", "drew", "edna", "ella", "emma", "enid",
    "eric", "etta", "evan", "faye", "fern", "fred", "gail", "gene", "gina",
    "glen", "hank", "hope", "hugh", "iris", "ivan", "jane", "jean", "jill",
    "joan", "jody", "joel", "john", "jose", "judy", "june", "karl", "kate",
    "kent", "kurt", "kyle", "lana", "liam", "lila", "lisa", "lola", "lucy",
    "luke", "lynn", "marc", "mark", "mary", "matt", "maya", "mona", "nash",
    "neal", "neil", "nell", "nina", "noah", "noel", "nora", "olga", "omar",
    "opal", "otis", "owen", "page", "paul", "pete", "phil", "rene", "rita",
    "rose", "ross", "rudy", "ruth", "ryan", "sara", "seth", "stan", "tara",
    "tess", "thea", "tina", "todd", "tony", "troy", "vera", "wade", "will",
    "zach", "zara",
]

SURNAMES = [
    "ash", "bell", "berg", "best", "bond", "boyd", "bray", "buck", "burr",
    "bush", "byrd", "cain", "carr", "case", "cash", "chan", "choi", "clay",
    "cobb", "cole", "cook", "cox", "crow", "dahl", "day", "dean", "diaz",
    "dix", "dow", "duke", "dunn", "dyer", "epps", "farr", "fine", "finn",
    "fish", "fisk", "ford", "foss", "fox", "frey", "fry", "gage", "gill",
    "gold", "gray", "grey", "hahn", "hale", "hall", "hart", "hays", "held",
    "hess", "hill", "holt", "howe", "hoyt", "huff", "hunt", "hurd", "hyde",
    "ives", "judd", "kane", "keen", "kemp", "kent", "kerr", "kidd", "kirk",
    "knox", "koch", "kyle", "lamb", "land", "lane", "lang", "lark", "leal",
    "lim", "lind", "long", "lott", "love", "low", "lund", "lutz", "lyle",
    "mack", "mann", "marr", "mays", "mead", "monk", "moon", "moss", "nash",
    "neff", "new", "noll", "nunn", "oaks", "odom", "orr", "page", "park",
    "peck", "penn", "pike", "pitt", "polk", "pond", "pope", "post", "pugh",
    "quon", "rand", "rask", "reid", "rice", "rich", "roth", "rowe", "rush",
    "ryan", "sage", "shaw", "sims", "snow", "swan", "tate", "teal", "vega",
    "voss", "wall", "webb", "west", "wolf", "wong", "wood", "wray", "wynn",
    "york", "zink",
]

SUBURBS = [
    "apex", "ayden", "bath", "boone", "cary", "clyde", "dover", "dunn",
    "eden", "elkin", "enka", "erwin", "faith", "garner", "hamlet", "hays",
    "icard", "kenly", "lenoir", "lowell", "macon", "maiden", "marion",
    "mebane", "milton", "monroe", "newton", "oxford", "selma", "shelby",
    "sparta", "salvo", "sanford", "tarboro", "trenton", "valdese", "wade",
    "warsaw", "waxhaw", "weldon", "wendell", "wilson", "yadkin", "zebulon",
    "dobson", "galax", "halifax", "liberty", "norwood", "raeford",
]

DEFAULT_SCHEMA = RecordSchema(
    attributes=(
        ("given_name", "string"),
        ("surname", "string"),
        ("suburb", "string"),
        ("postcode", "numeric"),
        ("gender", "categorical"),
    )
)

EDIT_OPS = ("insert", "delete", "substitute", "transpose")


@dataclass(frozen=True)
class CorruptionConfig:
    """Which share of duplicates gets how many character edits."""

    record_corruption_fraction: float = 0.0
    min_edits: int = 1
    max_edits: int = 2
    edit_ops: tuple[str, ...] = EDIT_OPS
    seed: int = 0

    def __post_init__(self):
        if not 0 <= self.record_corruption_fraction <= 1:
            raise ValueError("record_corruption_fraction must be in [0, 1]")
        if self.record_corruption_fraction > 0 and not self.edit_ops:
            raise ValueError("need at least one edit op when corrupting")
        for op in self.edit_ops:
            if op not in EDIT_OPS:
                raise ValueError(f"unknown edit op {op!r}")
        if not 1 <= self.min_edits <= self.max_edits:
            raise ValueError("need 1 <= min_edits <= max_edits")


@dataclass
class DatasetBundle:
    providers: list[tuple[str, list[PlainRecord]]]
    k_true: int
    manifest: dict = field(default_factory=dict)


def generate_entities(n: int, seed: int = 0) -> list[PlainRecord]:
    """n records with distinct entity ids and well-separated PII.

    Two random voters rarely agree on more than one quasi-identifier, so no
    two generated entities share more than one of (given name, surname,
    suburb); postcodes are unique by construction.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xDA7A]))
    postcodes = rng.choice(np.arange(10000, 100000), size=n, replace=False)
    seen: list[tuple] = []
    records = []
    for i in range(n):
        for _ in range(10000):
            values = (
                GIVEN_NAMES[rng.integers(len(GIVEN_NAMES))],
                SURNAMES[rng.integers(len(SURNAMES))],
                SUBURBS[rng.integers(len(SUBURBS))],
                f"{postcodes[i]:05d}",
                "m" if rng.random() < 0.5 else "f",
            )
            if all(
                sum(a == b for a, b in zip(values[:3], prev)) <= 1 for prev in seen
            ):
                break
        seen.append(values[:3])
        records.append(PlainRecord(values=values, entity_id=f"e{i:05d}"))
    return records


def _apply_edit(value: str, op: str, rng: np.random.Generator) -> str:
    letters = string.ascii_lowercase
    if op == "insert" or not value:
        pos = int(rng.integers(len(value) + 1))
        return value[:pos] + letters[rng.integers(26)] + value[pos:]
    if op == "delete":
        pos = int(rng.integers(len(value)))
        return value[:pos] + value[pos + 1 :]
    if op == "substitute":
        pos = int(rng.integers(len(value)))
        old = value[pos]
        choices = [c for c in letters if c != old]
        return value[:pos] + choices[rng.integers(len(choices))] + value[pos:][1:]
    # transpose
    if len(value) < 2:
        return value + letters[rng.integers(26)]
    pos = int(rng.integers(len(value) - 1))
    return value[:pos] + value[pos + 1] + value[pos] + value[pos + 2 :]


def corrupt_record(record: PlainRecord, schema: RecordSchema, cfg: CorruptionConfig, rng) -> PlainRecord:
    """Apply 1+ random character edits; guaranteed to differ from the original."""
    string_cols = [i for i, (_, kind) in enumerate(schema.attributes) if kind == "string"]
    values = list(record.values)
    n_edits = int(rng.integers(cfg.min_edits, cfg.max_edits + 1))
    for _ in range(50):  # retry until the record actually changed
        for _ in range(n_edits):
            col = string_cols[rng.integers(len(string_cols))]
            op = cfg.edit_ops[rng.integers(len(cfg.edit_ops))]
            values[col] = _apply_edit(str(values[col]), op, rng)
        if tuple(values) != record.values:
            break
    return PlainRecord(values=tuple(values), entity_id=record.entity_id)


def duplicate_and_corrupt(
    entities: list[PlainRecord],
    duplicates_per_entity: int = 1,
    cfg: CorruptionConfig = CorruptionConfig(),
    schema: RecordSchema = DEFAULT_SCHEMA,
) -> list[PlainRecord]:
    """Emit originals plus duplicates; an exact share of duplicates is corrupted."""
    if not entities:
        raise ValueError("entities must be nonempty")
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0xC0DE]))
    records = list(entities)
    duplicates = []
    for e in entities:
        for _ in range(duplicates_per_entity):
            duplicates.append(PlainRecord(values=e.values, entity_id=e.entity_id))
    n_corrupt = round(cfg.record_corruption_fraction * len(duplicates))
    corrupt_idx = set(rng.choice(len(duplicates), size=n_corrupt, replace=False).tolist()) if n_corrupt else set()
    for i, dup in enumerate(duplicates):
        if i in corrupt_idx:
            dup = corrupt_record(dup, schema, cfg, rng)
        records.append(dup)
    return records


def split_providers(records: list[PlainRecord], num_providers: int, seed: int = 0) -> DatasetBundle:
    """Random partition of records across providers; k_true is recorded."""
    if num_providers < 1:
        raise ValueError("num_providers must be >= 1")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x5917]))
    order = rng.permutation(len(records))
    providers: list[tuple[str, list[PlainRecord]]] = [
        (f"p{p}", []) for p in range(num_providers)
    ]
    for j, idx in enumerate(order):
        providers[j % num_providers][1].append(records[idx])
    k_true = len({r.entity_id for r in records})
    return DatasetBundle(
        providers=providers,
        k_true=k_true,
        manifest={"num_providers": num_providers, "split_seed": seed, "k_true": k_true},
    )


# --- file formats -----------------------------------------------------------


def write_schema(path, schema: RecordSchema) -> None:
    payload = {"attributes": [{"name": n, "kind": k} for n, k in schema.attributes]}
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")


def read_schema(path) -> RecordSchema:
    payload = json.loads(Path(path).read_text())
    return RecordSchema(
        attributes=tuple((a["name"], a["kind"]) for a in payload["attributes"])
    )


def write_records_csv(path, records: list[PlainRecord], schema: RecordSchema, include_entity_id=True) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = list(schema.names)
        if include_entity_id:
            header.append("entity_id")
        writer.writerow(header)
        for r in records:
            row = list(r.values)
            if include_entity_id:
                row.append(r.entity_id or "")
            writer.writerow(row)


def read_records_csv(path, schema: RecordSchema) -> list[PlainRecord]:
    """Read records from a header CSV; entity_id column is optional."""
    records = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [n for n in schema.names if n not in (reader.fieldnames or [])]
        if missing:
            raise ValueError(f"{path}: missing columns {missing}")
        for row in reader:
            records.append(
                PlainRecord(
                    values=tuple(row[n] for n in schema.names),
                    entity_id=row.get("entity_id") or None,
                )
            )
    return records


def write_bundle(out_dir, bundle: DatasetBundle, schema: RecordSchema = DEFAULT_SCHEMA) -> dict:
    """Write per-provider CSVs, schema JSON and a manifest; returns file map."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {"schema": str(out / "schema.json"), "providers": {}}
    write_schema(files["schema"], schema)
    for pid, records in bundle.providers:
        path = out / f"{pid}.csv"
        write_records_csv(path, records, schema)
        files["providers"][pid] = str(path)
    manifest = dict(bundle.manifest)
    manifest["k_true"] = bundle.k_true
    manifest["files"] = files
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    files["manifest"] = str(out / "manifest.json")
    return files
