//! Model archives: a gzip-compressed tar whose `metadata.json` member
//! records the format version and a SHA-256 fingerprint of every other
//! member. Tar headers carry no timestamps or owners, so equal content
//! always produces byte-identical archives.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use flate2::{Compression, GzBuilder};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::engine::ModelArtifacts;

pub const FORMAT_VERSION: u32 = 1;
pub const METADATA_MEMBER: &str = "metadata.json";

const NLU_MEMBER: &str = "nlu.json";
const POLICY_MEMBER: &str = "policies.json";
const DOMAIN_MEMBER: &str = "domain.json";

#[derive(Debug, Error)]
pub enum ArchiveError {
    #[error("archive i/o: {0}")]
    Io(#[from] io::Error),
    #[error("archive format version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("archive fingerprint mismatch: metadata says {recorded}, content hashes to {actual}")]
    FingerprintMismatch { recorded: String, actual: String },
    #[error("archive is missing member {0:?}")]
    MissingMember(String),
    #[error("archive member {member:?} is malformed: {message}")]
    Malformed { member: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchiveMetadata {
    pub format_version: u32,
    pub fingerprint: String,
    pub members: Vec<String>,
}

/// SHA-256 over `(name, length, bytes)` of every member in name order.
pub fn fingerprint_members(members: &BTreeMap<String, Vec<u8>>) -> String {
    let mut hasher = Sha256::new();
    for (name, bytes) in members {
        hasher.update(name.as_bytes());
        hasher.update([0u8]);
        hasher.update((bytes.len() as u64).to_le_bytes());
        hasher.update(bytes);
    }
    hex::encode(hasher.finalize())
}

fn append_member<W: Write>(builder: &mut tar::Builder<W>, name: &str, bytes: &[u8]) -> io::Result<()> {
    let mut header = tar::Header::new_gnu();
    header.set_path(name)?;
    header.set_size(bytes.len() as u64);
    header.set_mode(0o644);
    header.set_mtime(0);
    header.set_uid(0);
    header.set_gid(0);
    header.set_entry_type(tar::EntryType::Regular);
    header.set_cksum();
    builder.append(&header, bytes)
}

/// Writes `members` plus a metadata member; returns the fingerprint.
pub fn write_archive(path: &Path, members: &BTreeMap<String, Vec<u8>>) -> Result<String, ArchiveError> {
    write_archive_with_version(path, members, FORMAT_VERSION)
}

pub(crate) fn write_archive_with_version(
    path: &Path,
    members: &BTreeMap<String, Vec<u8>>,
    version: u32,
) -> Result<String, ArchiveError> {
    let fingerprint = fingerprint_members(members);
    let metadata = ArchiveMetadata {
        format_version: version,
        fingerprint: fingerprint.clone(),
        members: members.keys().cloned().collect(),
    };
    let file = File::create(path)?;
    let gz = GzBuilder::new().mtime(0).write(file, Compression::default());
    let mut builder = tar::Builder::new(gz);
    let meta_bytes = serde_json::to_vec_pretty(&metadata).expect("metadata serializes");
    append_member(&mut builder, METADATA_MEMBER, &meta_bytes)?;
    for (name, bytes) in members {
        append_member(&mut builder, name, bytes)?;
    }
    builder.into_inner()?.finish()?.sync_all()?;
    Ok(fingerprint)
}

/// Reads an archive, checking version and fingerprint before returning
/// the payload members.
pub fn read_archive(path: &Path) -> Result<(ArchiveMetadata, BTreeMap<String, Vec<u8>>), ArchiveError> {
    let file = File::open(path)?;
    let mut archive = tar::Archive::new(GzDecoder::new(file));
    let mut metadata: Option<ArchiveMetadata> = None;
    let mut members = BTreeMap::new();
    for entry in archive.entries()? {
        let mut entry = entry?;
        let name = entry.path()?.to_string_lossy().into_owned();
        let mut bytes = Vec::new();
        entry.read_to_end(&mut bytes)?;
        if name == METADATA_MEMBER {
            let meta = serde_json::from_slice(&bytes).map_err(|e| ArchiveError::Malformed {
                member: name.clone(),
                message: e.to_string(),
            })?;
            metadata = Some(meta);
        } else {
            members.insert(name, bytes);
        }
    }
    let metadata = metadata.ok_or_else(|| ArchiveError::MissingMember(METADATA_MEMBER.into()))?;
    if metadata.format_version != FORMAT_VERSION {
        return Err(ArchiveError::VersionMismatch {
            found: metadata.format_version,
            expected: FORMAT_VERSION,
        });
    }
    let actual = fingerprint_members(&members);
    if actual != metadata.fingerprint {
        return Err(ArchiveError::FingerprintMismatch {
            recorded: metadata.fingerprint,
            actual,
        });
    }
    Ok((metadata, members))
}

pub fn artifact_members(artifacts: &ModelArtifacts) -> BTreeMap<String, Vec<u8>> {
    let mut members = BTreeMap::new();
    members.insert(
        NLU_MEMBER.to_string(),
        serde_json::to_vec(&artifacts.nlu).expect("nlu model serializes"),
    );
    members.insert(
        POLICY_MEMBER.to_string(),
        serde_json::to_vec(&artifacts.policies).expect("policies serialize"),
    );
    members.insert(
        DOMAIN_MEMBER.to_string(),
        serde_json::to_vec(&artifacts.domain).expect("domain serializes"),
    );
    members
}

fn decode<T: for<'de> Deserialize<'de>>(members: &BTreeMap<String, Vec<u8>>, name: &str) -> Result<T, ArchiveError> {
    let bytes = members
        .get(name)
        .ok_or_else(|| ArchiveError::MissingMember(name.into()))?;
    serde_json::from_slice(bytes).map_err(|e| ArchiveError::Malformed {
        member: name.into(),
        message: e.to_string(),
    })
}

/// Packages trained artifacts at `path` and returns the fingerprint.
pub fn package_model(artifacts: &ModelArtifacts, path: &Path) -> Result<String, ArchiveError> {
    write_archive(path, &artifact_members(artifacts))
}

/// Loads artifacts and the archive fingerprint.
pub fn load_model(path: &Path) -> Result<(ModelArtifacts, String), ArchiveError> {
    let (metadata, members) = read_archive(path)?;
    let artifacts = ModelArtifacts {
        nlu: decode(&members, NLU_MEMBER)?,
        policies: decode(&members, POLICY_MEMBER)?,
        domain: decode(&members, DOMAIN_MEMBER)?,
    };
    Ok((artifacts, metadata.fingerprint))
}
