//! Content-addressed nerve store.
//!
//! A [`Store`] is a finite set of [`Nerve`]s keyed by their [`HashId`]. Each
//! nerve carries an ordered reference list and an opaque record string; its
//! identity is the truncated SHA-256 of the record alone, so references never
//! participate in hashing and reference cycles are representable.
//!
//! Well-formedness is expressed as six numbered axioms (0 to 5) checked by
//! [`Store::validate`]. Mutating operations refuse any change that would
//! break axioms 1 through 5; axiom 0 is enforced by construction since every
//! insert derives the id from the record.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::{MapAccess, Visitor};
use serde::{Deserialize, Deserializer, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Number of hex characters kept from the SHA-256 digest.
pub const ID_HEX_LEN: usize = 12;

/// Identity of a nerve.
///
/// Ids produced by [`compute_id`] are always 12 lowercase hex characters.
/// Structural-mode stores may also carry free-form labels such as `"a1"`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HashId(String);

impl HashId {
    pub fn new(value: impl Into<String>) -> Self {
        HashId(value.into())
    }

    /// Parses a content hash, rejecting anything but `[0-9a-f]{12}`.
    pub fn parse_hash(value: &str) -> Result<Self, StoreError> {
        let id = HashId::new(value);
        if id.is_content_hash() {
            Ok(id)
        } else {
            Err(StoreError::InvalidId {
                value: value.to_string(),
            })
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// True when the id has the shape of a truncated SHA-256 digest.
    pub fn is_content_hash(&self) -> bool {
        self.0.len() == ID_HEX_LEN
            && self
                .0
                .bytes()
                .all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b))
    }
}

impl fmt::Display for HashId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for HashId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

impl From<&str> for HashId {
    fn from(value: &str) -> Self {
        HashId::new(value)
    }
}

impl From<String> for HashId {
    fn from(value: String) -> Self {
        HashId(value)
    }
}

impl AsRef<str> for HashId {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

impl std::borrow::Borrow<str> for HashId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

/// First 12 lowercase hex characters of SHA-256 over the record's UTF-8 bytes.
pub fn compute_id(record: &str) -> HashId {
    let digest = Sha256::digest(record.as_bytes());
    let mut hex = hex::encode(digest);
    hex.truncate(ID_HEX_LEN);
    HashId(hex)
}

/// The store's unit: identity, ordered references and an opaque record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Nerve {
    pub id: HashId,
    #[serde(rename = "ref")]
    pub refs: Vec<HashId>,
    pub record: String,
}

impl Nerve {
    /// `len(ref) - 1`, saturating at zero for a malformed empty list.
    pub fn width(&self) -> usize {
        self.refs.len().saturating_sub(1)
    }

    pub fn is_atom(&self) -> bool {
        self.refs.len() == 1
    }
}

/// Whether axiom 0 (id = hash of record) is enforced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HashMode {
    #[default]
    Strict,
    /// Ids are treated as labels; used for hand-drawn fixtures.
    Structural,
}

impl std::str::FromStr for HashMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "strict" => Ok(HashMode::Strict),
            "structural" => Ok(HashMode::Structural),
            other => Err(format!("unknown hash mode `{other}`")),
        }
    }
}

impl fmt::Display for HashMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HashMode::Strict => f.write_str("strict"),
            HashMode::Structural => f.write_str("structural"),
        }
    }
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("record of {id} is already stored with a different reference list")]
    DuplicateRecordConflict { id: HashId },
    #[error("hash collision on {id}: a different record already owns this id")]
    HashCollision { id: HashId },
    #[error("reference {missing} does not resolve to a stored nerve")]
    UnknownRef { missing: HashId },
    #[error("reference {id} appears more than once")]
    DuplicateRef { id: HashId },
    #[error("nerve {id} would reference itself")]
    SelfRef { id: HashId },
    #[error("a relation needs at least two references, got {got}")]
    TooFewRefs { got: usize },
    #[error("no nerve with id {id}")]
    NotFound { id: HashId },
    #[error("cannot remove {id}: still referenced by {}", join_ids(.dependents))]
    WouldBreakClosure {
        id: HashId,
        dependents: Vec<HashId>,
    },
    #[error("`{value}` is not a 12-character lowercase hex id")]
    InvalidId { value: String },
    #[error("malformed store file: {0}")]
    MalformedFile(String),
    #[error("store has {count} conflicting duplicate id entries; resolve them before saving")]
    UnresolvedIdConflicts { count: usize },
    #[error("store {} is locked by another writer", .path.display())]
    Locked { path: PathBuf },
    #[error("i/o error on {}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn join_ids(ids: &[HashId]) -> String {
    ids.iter().map(HashId::as_str).collect::<Vec<_>>().join(", ")
}

impl StoreError {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            StoreError::DuplicateRecordConflict { .. } => "duplicate_record_conflict",
            StoreError::HashCollision { .. } => "hash_collision",
            StoreError::UnknownRef { .. } => "unknown_ref",
            StoreError::DuplicateRef { .. } => "duplicate_ref",
            StoreError::SelfRef { .. } => "self_ref",
            StoreError::TooFewRefs { .. } => "too_few_refs",
            StoreError::NotFound { .. } => "unknown_id",
            StoreError::WouldBreakClosure { .. } => "would_break_closure",
            StoreError::InvalidId { .. } => "invalid_id",
            StoreError::MalformedFile(_) => "malformed_file",
            StoreError::UnresolvedIdConflicts { .. } => "id_conflict",
            StoreError::Locked { .. } => "store_locked",
            StoreError::Io { .. } => "io_error",
        }
    }

    /// The axiom a refused mutation would have violated, if any.
    pub fn axiom(&self) -> Option<u8> {
        match self {
            StoreError::DuplicateRecordConflict { .. } | StoreError::HashCollision { .. } => {
                Some(2)
            }
            StoreError::UnknownRef { .. } | StoreError::WouldBreakClosure { .. } => Some(3),
            StoreError::DuplicateRef { .. } => Some(4),
            StoreError::SelfRef { .. } => Some(5),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub axiom: u8,
    pub nerve_id: HashId,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub is_well_formed: bool,
}

impl ValidationReport {
    fn from_violations(violations: Vec<Violation>) -> Self {
        let is_well_formed = violations.is_empty();
        ValidationReport {
            violations,
            is_well_formed,
        }
    }

    /// Distinct axiom indices that were violated, ascending.
    pub fn axioms(&self) -> BTreeSet<u8> {
        self.violations.iter().map(|v| v.axiom).collect()
    }
}

/// Id-keyed set of nerves plus the hash mode.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Store {
    nerves: BTreeMap<HashId, Nerve>,
    mode: HashMode,
    // Extra entries read from a file that repeated a key with a different
    // body. They break injectivity and are only reported by `validate`.
    shadowed: Vec<Nerve>,
}

impl Store {
    pub fn new(mode: HashMode) -> Self {
        Store {
            nerves: BTreeMap::new(),
            mode,
            shadowed: Vec::new(),
        }
    }

    pub fn mode(&self) -> HashMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.nerves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nerves.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Nerve> {
        self.nerves.get(id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.nerves.contains_key(id)
    }

    /// Nerves in ascending id order.
    pub fn iter(&self) -> impl Iterator<Item = &Nerve> {
        self.nerves.values()
    }

    pub fn ids(&self) -> impl Iterator<Item = &HashId> {
        self.nerves.keys()
    }

    /// Entries whose key repeated an existing key with a different body.
    pub fn id_conflicts(&self) -> &[Nerve] {
        &self.shadowed
    }

    /// Ids of nerves (other than `id` itself) whose reference list names `id`.
    pub fn dependents(&self, id: &str) -> Vec<HashId> {
        self.nerves
            .values()
            .filter(|n| n.id.as_str() != id && n.refs.iter().any(|r| r.as_str() == id))
            .map(|n| n.id.clone())
            .collect()
    }

    /// Inserts a width-0 nerve whose id is the hash of `record`.
    pub fn insert_atom(&mut self, record: &str) -> Result<HashId, StoreError> {
        let id = compute_id(record);
        let refs = vec![id.clone()];
        self.insert_checked(id, refs, record)
    }

    /// Inserts a relation over at least two existing nerves.
    pub fn insert_nerve(&mut self, record: &str, refs: &[HashId]) -> Result<HashId, StoreError> {
        if refs.len() < 2 {
            return Err(StoreError::TooFewRefs { got: refs.len() });
        }
        let id = compute_id(record);
        let mut seen = BTreeSet::new();
        for r in refs {
            if !seen.insert(r) {
                return Err(StoreError::DuplicateRef { id: r.clone() });
            }
        }
        if refs.contains(&id) {
            return Err(StoreError::SelfRef { id });
        }
        if let Some(missing) = refs.iter().find(|r| !self.nerves.contains_key(*r)) {
            return Err(StoreError::UnknownRef {
                missing: missing.clone(),
            });
        }
        self.insert_checked(id, refs.to_vec(), record)
    }

    fn insert_checked(
        &mut self,
        id: HashId,
        refs: Vec<HashId>,
        record: &str,
    ) -> Result<HashId, StoreError> {
        if let Some(existing) = self.nerves.get(&id) {
            if existing.record != record {
                return Err(StoreError::HashCollision { id });
            }
            if existing.refs != refs {
                return Err(StoreError::DuplicateRecordConflict { id });
            }
            return Ok(id);
        }
        self.nerves.insert(
            id.clone(),
            Nerve {
                id: id.clone(),
                refs,
                record: record.to_string(),
            },
        );
        Ok(id)
    }

    /// Inserts a nerve as-is, replacing any entry with the same id.
    ///
    /// No axiom is checked. Meant for importers and fixtures; run
    /// [`Store::validate`] afterwards.
    pub fn insert_unchecked(&mut self, nerve: Nerve) -> Option<Nerve> {
        self.nerves.insert(nerve.id.clone(), nerve)
    }

    /// Removes a nerve that nothing else references.
    pub fn remove_nerve(&mut self, id: &str) -> Result<Nerve, StoreError> {
        if !self.nerves.contains_key(id) {
            return Err(StoreError::NotFound { id: id.into() });
        }
        let dependents = self.dependents(id);
        if !dependents.is_empty() {
            return Err(StoreError::WouldBreakClosure {
                id: id.into(),
                dependents,
            });
        }
        Ok(self.nerves.remove(id).expect("presence checked above"))
    }

    /// Removes a set of nerves at once, as needed for reference cycles.
    ///
    /// Fails without modifying the store if any id is missing or if a nerve
    /// outside the batch references a member of it.
    pub fn remove_batch(&mut self, ids: &[HashId]) -> Result<Vec<Nerve>, StoreError> {
        let batch: BTreeSet<&HashId> = ids.iter().collect();
        for id in &batch {
            if !self.nerves.contains_key(*id) {
                return Err(StoreError::NotFound { id: (*id).clone() });
            }
        }
        for id in &batch {
            let outside: Vec<HashId> = self
                .dependents(id.as_str())
                .into_iter()
                .filter(|d| !batch.contains(d))
                .collect();
            if !outside.is_empty() {
                return Err(StoreError::WouldBreakClosure {
                    id: (*id).clone(),
                    dependents: outside,
                });
            }
        }
        Ok(batch
            .into_iter()
            .filter_map(|id| self.nerves.remove(id))
            .collect())
    }

    /// Checks every axiom (axiom 0 only in strict mode). Read-only.
    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        for nerve in self.nerves.values().chain(self.shadowed.iter()) {
            self.check_nerve(nerve, &mut violations);
        }
        for extra in &self.shadowed {
            violations.push(Violation {
                axiom: 2,
                nerve_id: extra.id.clone(),
                message: format!("id {} names more than one distinct nerve", extra.id),
            });
        }
        ValidationReport::from_violations(violations)
    }

    fn check_nerve(&self, nerve: &Nerve, out: &mut Vec<Violation>) {
        let mut push = |axiom: u8, message: String| {
            out.push(Violation {
                axiom,
                nerve_id: nerve.id.clone(),
                message,
            })
        };
        if self.mode == HashMode::Strict {
            let expected = compute_id(&nerve.record);
            if expected != nerve.id {
                push(0, format!("record hashes to {expected}, not {}", nerve.id));
            }
        }
        if nerve.refs.len() == 1 && nerve.refs[0] != nerve.id {
            push(
                1,
                format!("atom references {} instead of itself", nerve.refs[0]),
            );
        }
        for r in &nerve.refs {
            if !self.nerves.contains_key(r) {
                push(3, format!("reference {r} does not resolve"));
            }
        }
        if nerve.refs.len() > 1 {
            let mut seen = BTreeSet::new();
            for r in &nerve.refs {
                if !seen.insert(r) {
                    push(4, format!("reference {r} is repeated"));
                }
            }
            if nerve.refs.contains(&nerve.id) {
                push(5, "relation references itself".to_string());
            }
        }
    }

    /// Parses the JSON store format. Axioms are not checked here.
    pub fn from_json_str(text: &str, mode: HashMode) -> Result<Self, StoreError> {
        let raw: RawFile =
            serde_json::from_str(text).map_err(|e| StoreError::MalformedFile(e.to_string()))?;
        let mut store = Store::new(mode);
        for (key, body) in raw.0 {
            if body.refs.is_empty() {
                return Err(StoreError::MalformedFile(format!(
                    "entry {key} has an empty ref list"
                )));
            }
            let nerve = Nerve {
                id: HashId::new(key),
                refs: body.refs,
                record: body.record,
            };
            match store.nerves.get(&nerve.id) {
                Some(existing) if *existing == nerve => {}
                Some(_) => store.shadowed.push(nerve),
                None => {
                    store.nerves.insert(nerve.id.clone(), nerve);
                }
            }
        }
        Ok(store)
    }

    pub fn load(path: impl AsRef<Path>, mode: HashMode) -> Result<Self, StoreError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| StoreError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Store::from_json_str(&text, mode)
    }

    /// Canonical serialization: ids ascending, one nerve per line,
    /// two-space indent, LF endings and a final newline.
    pub fn to_canonical_json(&self) -> Result<String, StoreError> {
        if !self.shadowed.is_empty() {
            return Err(StoreError::UnresolvedIdConflicts {
                count: self.shadowed.len(),
            });
        }
        if self.nerves.is_empty() {
            return Ok("{}\n".to_string());
        }
        let mut out = String::from("{\n");
        let last = self.nerves.len() - 1;
        for (i, nerve) in self.nerves.values().enumerate() {
            let refs: Vec<String> = nerve.refs.iter().map(|r| json_string(r.as_str())).collect();
            out.push_str(&format!(
                "  {}: {{ \"ref\": [{}], \"record\": {} }}",
                json_string(nerve.id.as_str()),
                refs.join(", "),
                json_string(&nerve.record)
            ));
            out.push_str(if i == last { "\n" } else { ",\n" });
        }
        out.push_str("}\n");
        Ok(out)
    }

    /// Writes the canonical form through a sibling temp file and a rename,
    /// so readers never observe a partially written store.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), StoreError> {
        let path = path.as_ref();
        let text = self.to_canonical_json()?;
        let io = |source| StoreError::Io {
            path: path.to_path_buf(),
            source,
        };
        let tmp = sibling(path, &format!(".tmp{}", std::process::id()));
        {
            let mut file = fs::File::create(&tmp).map_err(io)?;
            file.write_all(text.as_bytes()).map_err(io)?;
            file.sync_all().map_err(io)?;
        }
        fs::rename(&tmp, path).map_err(io)
    }
}

fn json_string(s: &str) -> String {
    serde_json::to_string(s).expect("string serialization cannot fail")
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(suffix);
    path.with_file_name(name)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNerve {
    #[serde(rename = "ref")]
    refs: Vec<HashId>,
    #[serde(default)]
    record: String,
}

// Keeps every key, including repeats, so injectivity violations survive
// parsing instead of being silently overwritten.
struct RawFile(Vec<(String, RawNerve)>);

impl<'de> Deserialize<'de> for RawFile {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct EntriesVisitor;

        impl<'de> Visitor<'de> for EntriesVisitor {
            type Value = RawFile;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a JSON object mapping ids to {ref, record}")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<RawFile, A::Error> {
                let mut entries = Vec::new();
                while let Some((key, value)) = map.next_entry::<String, RawNerve>()? {
                    entries.push((key, value));
                }
                Ok(RawFile(entries))
            }
        }

        deserializer.deserialize_map(EntriesVisitor)
    }
}

/// Exclusive writer lock held through an adjacent `<store>.lock` file.
#[derive(Debug)]
pub struct StoreLock {
    path: PathBuf,
}

impl StoreLock {
    /// Tries to create the lockfile, retrying for up to `wait`.
    pub fn acquire(store_path: impl AsRef<Path>, wait: std::time::Duration) -> Result<Self, StoreError> {
        let path = sibling(store_path.as_ref(), ".lock");
        let deadline = std::time::Instant::now() + wait;
        loop {
            match fs::OpenOptions::new()
                .write(true)
                .create_new(true)
                .open(&path)
            {
                Ok(mut file) => {
                    let _ = writeln!(file, "{}", std::process::id());
                    return Ok(StoreLock { path });
                }
                Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                    if std::time::Instant::now() >= deadline {
                        return Err(StoreError::Locked { path });
                    }
                    std::thread::sleep(std::time::Duration::from_millis(20));
                }
                Err(source) => return Err(StoreError::Io { path, source }),
            }
        }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

impl Drop for StoreLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}
