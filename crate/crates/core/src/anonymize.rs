//! Pseudonymisation and field minimisation of normalised bundles.
//!
//! Driver ids are replaced by a keyed HMAC-SHA256 digest truncated to 16 hex
//! characters. Whoever holds the salt can recompute the mapping from known
//! ids; without it the pseudonyms are opaque.

use std::path::Path;

use hmac::{Hmac, Mac};
use sha2::Sha256;
use thiserror::Error;

use crate::ingest::{NormalizedBundle, StrippableField};
use crate::model::DriverId;

type HmacSha256 = Hmac<Sha256>;

pub const MIN_SALT_BYTES: usize = 16;
pub const PSEUDONYM_HEX_LEN: usize = 16;
pub const DEFAULT_SALT_ENV: &str = "GIGAUDIT_SALT";

#[derive(Debug, Error)]
pub enum AnonymizeError {
    #[error("salt must be at least {MIN_SALT_BYTES} bytes, got {0}")]
    WeakSalt(usize),
    #[error("no salt: environment variable {0} unset and no key file given")]
    MissingSalt(String),
    #[error("cannot read key file {0}: {1}")]
    KeyFile(String, std::io::Error),
    #[error("unknown field {0:?} in strip policy")]
    UnknownField(String),
}

/// Secret key for pseudonymisation.
#[derive(Clone)]
pub struct Salt(Vec<u8>);

impl std::fmt::Debug for Salt {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Salt(<{} bytes>)", self.0.len())
    }
}

impl Salt {
    pub fn new(bytes: impl Into<Vec<u8>>) -> Result<Self, AnonymizeError> {
        let bytes = bytes.into();
        if bytes.len() < MIN_SALT_BYTES {
            return Err(AnonymizeError::WeakSalt(bytes.len()));
        }
        Ok(Salt(bytes))
    }

    /// Reads the salt from a key file; one trailing newline is ignored.
    pub fn from_file(path: &Path) -> Result<Self, AnonymizeError> {
        let mut bytes = std::fs::read(path).map_err(|e| AnonymizeError::KeyFile(path.display().to_string(), e))?;
        if bytes.last() == Some(&b'\n') {
            bytes.pop();
            if bytes.last() == Some(&b'\r') {
                bytes.pop();
            }
        }
        Salt::new(bytes)
    }

    pub fn from_env(var: &str) -> Result<Self, AnonymizeError> {
        match std::env::var_os(var) {
            Some(v) => Salt::new(v.into_encoded_bytes()),
            None => Err(AnonymizeError::MissingSalt(var.to_string())),
        }
    }

    /// Key file wins over the environment variable when both are given.
    pub fn resolve(env_var: &str, key_file: Option<&Path>) -> Result<Self, AnonymizeError> {
        match key_file {
            Some(p) => Salt::from_file(p),
            None => Salt::from_env(env_var),
        }
    }

    pub fn pseudonym(&self, id: &str) -> String {
        let mut mac = HmacSha256::new_from_slice(&self.0).expect("HMAC accepts any key length");
        mac.update(id.as_bytes());
        let digest = mac.finalize().into_bytes();
        let mut out = hex::encode(&digest[..PSEUDONYM_HEX_LEN / 2]);
        out.truncate(PSEUDONYM_HEX_LEN);
        out
    }
}

/// Replaces every driver id in the bundle with its keyed pseudonym.
pub fn pseudonymize(bundle: &NormalizedBundle, salt: &Salt) -> NormalizedBundle {
    let mut out = bundle.clone();
    let map = |id: &DriverId| DriverId::new(salt.pseudonym(id.as_str()));
    out.driver_id = map(&bundle.driver_id);
    for t in &mut out.trips {
        t.driver_id = map(&t.driver_id);
    }
    for p in &mut out.payments {
        p.driver_id = map(&p.driver_id);
    }
    for d in &mut out.dispatches {
        d.driver_id = map(&d.driver_id);
    }
    for s in &mut out.sessions {
        s.driver_id = map(&s.driver_id);
    }
    if let Some(p) = out.profile.as_mut() {
        p.driver_id = map(&p.driver_id);
    }
    out
}

/// Names, emails, exact addresses, licence plates and free-text memos.
pub fn default_policy() -> Vec<StrippableField> {
    vec![
        StrippableField::Name,
        StrippableField::Email,
        StrippableField::PickupAddress,
        StrippableField::DropoffAddress,
        StrippableField::VehiclePlate,
        StrippableField::Memo,
    ]
}

pub fn parse_policy<S: AsRef<str>>(names: &[S]) -> Result<Vec<StrippableField>, AnonymizeError> {
    names
        .iter()
        .map(|n| StrippableField::parse(n.as_ref()).ok_or_else(|| AnonymizeError::UnknownField(n.as_ref().to_string())))
        .collect()
}

/// Clears the listed fields from every record and marks them stripped so
/// the writer drops their columns.
pub fn strip_fields(bundle: &NormalizedBundle, policy: &[StrippableField]) -> NormalizedBundle {
    let mut out = bundle.clone();
    for &field in policy {
        out.stripped.insert(field);
        match field {
            StrippableField::Memo => out.payments.iter_mut().for_each(|p| p.memo = None),
            StrippableField::PickupAddress => out.trips.iter_mut().for_each(|t| t.pickup_address = None),
            StrippableField::DropoffAddress => out.trips.iter_mut().for_each(|t| t.dropoff_address = None),
            StrippableField::VehiclePlate => out.trips.iter_mut().for_each(|t| t.vehicle_plate = None),
            StrippableField::OriginTag => out.trips.iter_mut().for_each(|t| t.origin_tag.clear()),
            StrippableField::DestTag => out.trips.iter_mut().for_each(|t| t.dest_tag.clear()),
            StrippableField::Name => {
                if let Some(p) = out.profile.as_mut() {
                    p.name = None;
                }
            }
            StrippableField::Email => {
                if let Some(p) = out.profile.as_mut() {
                    p.email = None;
                }
            }
            StrippableField::Gender => {
                if let Some(p) = out.profile.as_mut() {
                    p.gender = None;
                }
            }
            StrippableField::AgeBand => {
                if let Some(p) = out.profile.as_mut() {
                    p.age_band = None;
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{serialize_bundle, TableKind};
    use crate::model::{AppSession, Calendar, DriverProfile, Gender, Money, PaymentCategory, PaymentEvent, Timestamp};
    use std::collections::BTreeSet;

    fn salt(s: &str) -> Salt {
        Salt::new(s.as_bytes().to_vec()).unwrap()
    }

    fn bundle(id: &str) -> NormalizedBundle {
        let d = DriverId::new(id);
        NormalizedBundle {
            driver_id: d.clone(),
            trips: vec![],
            payments: vec![PaymentEvent {
                driver_id: d.clone(),
                ts: Timestamp::from_secs(1_600_000_000),
                category: PaymentCategory::Tip,
                amount: Money::gbp(250),
                memo: Some("thanks from MARKER-memo".into()),
            }],
            dispatches: vec![],
            sessions: vec![AppSession {
                driver_id: d.clone(),
                login_ts: Timestamp::from_secs(1_600_000_000),
                logout_ts: Timestamp::from_secs(1_600_003_600),
            }],
            profile: Some(DriverProfile {
                driver_id: d,
                gender: Some(Gender::Female),
                age_band: None,
                first_trip_ts: Timestamp::from_secs(1_500_000_000),
                name: Some("MARKER-name".into()),
                email: Some("marker@example.org".into()),
            }),
            stripped: BTreeSet::new(),
            tables: [TableKind::Payments, TableKind::Sessions, TableKind::Profile].into(),
        }
    }

    #[test]
    fn weak_salt_rejected() {
        assert!(matches!(Salt::new(b"short".to_vec()), Err(AnonymizeError::WeakSalt(5))));
    }

    #[test]
    fn deterministic_and_salt_sensitive() {
        let a = salt("0123456789abcdef-one");
        let b = salt("0123456789abcdef-two");
        assert_eq!(a.pseudonym("driver-1"), a.pseudonym("driver-1"));
        assert_ne!(a.pseudonym("driver-1"), b.pseudonym("driver-1"));
        let p = a.pseudonym("driver-1");
        assert_eq!(p.len(), 16);
        assert!(p.bytes().all(|c| c.is_ascii_hexdigit()));
    }

    #[test]
    fn three_drivers_three_pseudonyms() {
        let s = salt("0123456789abcdef");
        let ids: BTreeSet<String> = ["a", "b", "c"].iter().map(|i| s.pseudonym(i)).collect();
        assert_eq!(ids.len(), 3);
    }

    #[test]
    fn pseudonymize_rewrites_every_reference() {
        let s = salt("0123456789abcdef");
        let out = pseudonymize(&bundle("raw-driver-42"), &s);
        let text: String = serialize_bundle(&out).into_values().collect();
        assert!(!text.contains("raw-driver-42"));
        let pid = out.driver_id.clone();
        assert!(out.payments.iter().all(|p| p.driver_id == pid));
        assert!(out.sessions.iter().all(|x| x.driver_id == pid));
        assert_eq!(out.profile.as_ref().unwrap().driver_id, pid);
        assert_eq!(out.payments.len(), 1);
    }

    #[test]
    fn memo_policy_removes_memo() {
        let out = strip_fields(&bundle("d"), &parse_policy(&["memo"]).unwrap());
        assert!(out.payments.iter().all(|p| p.memo.is_none()));
        let text = &serialize_bundle(&out)[&TableKind::Payments];
        assert!(!text.contains("memo"));
        assert!(!text.contains("MARKER"));
    }

    #[test]
    fn empty_policy_is_identity() {
        let b = bundle("d");
        assert_eq!(serialize_bundle(&strip_fields(&b, &[])), serialize_bundle(&b));
    }

    #[test]
    fn default_policy_removes_markers() {
        let out = strip_fields(&bundle("d"), &default_policy());
        let text: String = serialize_bundle(&out).into_values().collect();
        assert!(!text.contains("MARKER"));
        assert!(!text.contains("marker@example.org"));
        // non-listed profile fields survive
        assert!(text.contains(",F,"));
        let _ = Calendar::default();
    }

    #[test]
    fn unknown_policy_field() {
        assert!(matches!(
            parse_policy(&["shoe_size"]),
            Err(AnonymizeError::UnknownField(f)) if f == "shoe_size"
        ));
    }

    #[test]
    fn salt_from_key_file_trims_newline() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("key");
        std::fs::write(&p, "0123456789abcdef\n").unwrap();
        let from_file = Salt::from_file(&p).unwrap();
        assert_eq!(from_file.pseudonym("x"), salt("0123456789abcdef").pseudonym("x"));
        assert!(matches!(
            Salt::resolve("GIGAUDIT_TEST_SURELY_UNSET_VAR", None),
            Err(AnonymizeError::MissingSalt(_))
        ));
    }
}
