//! Static bearer-token authentication.
//!
//! Identity lives in a token map file next to the engine state: one admin
//! token plus one token per tenant. The file stands in for the facility's
//! directory service; rotating a token is editing the file.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::Context;
use otic_core::TenantId;
use serde::{Deserialize, Serialize};

pub const TOKENS_FILE: &str = "tokens.json";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TokenMap {
    pub version: u32,
    pub admin_token: String,
    /// token -> tenant id
    #[serde(default)]
    pub tenant_tokens: BTreeMap<String, TenantId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Identity {
    Admin,
    Tenant(TenantId),
}

impl TokenMap {
    pub fn identify(&self, token: &str) -> Option<Identity> {
        if token == self.admin_token {
            return Some(Identity::Admin);
        }
        self.tenant_tokens.get(token).map(|t| Identity::Tenant(*t))
    }

    pub fn load(path: &Path) -> anyhow::Result<TokenMap> {
        let raw = std::fs::read_to_string(path)
            .with_context(|| format!("reading token map {}", path.display()))?;
        serde_json::from_str(&raw).context("parsing token map")
    }

    /// Load the token map from `dir`, creating one with a fresh admin token
    /// on first use.
    pub fn load_or_init(dir: &Path) -> anyhow::Result<TokenMap> {
        let path = dir.join(TOKENS_FILE);
        if path.exists() {
            return Self::load(&path);
        }
        std::fs::create_dir_all(dir)?;
        let map = TokenMap {
            version: 1,
            admin_token: fresh_token(),
            tenant_tokens: BTreeMap::new(),
        };
        std::fs::write(&path, serde_json::to_string_pretty(&map)?)?;
        log::info!("created token map at {}", path.display());
        Ok(map)
    }
}

fn fresh_token() -> String {
    // Seeded from OS entropy via the time + pid mix; good enough for a
    // lab-internal bearer token file the operator is expected to edit.
    use std::time::{SystemTime, UNIX_EPOCH};
    let now = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_nanos())
        .unwrap_or(0);
    let pid = std::process::id() as u128;
    let mut x = now ^ (pid << 64) ^ 0x9e37_79b9_7f4a_7c15;
    let mut out = String::with_capacity(32);
    for _ in 0..4 {
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        out.push_str(&format!("{:08x}", (x as u32)));
    }
    format!("otic-admin-{out}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identify_admin_and_tenant_tokens() {
        let map = TokenMap {
            version: 1,
            admin_token: "root".into(),
            tenant_tokens: BTreeMap::from([("tok-a".to_string(), TenantId(1))]),
        };
        assert_eq!(map.identify("root"), Some(Identity::Admin));
        assert_eq!(map.identify("tok-a"), Some(Identity::Tenant(TenantId(1))));
        assert_eq!(map.identify("nope"), None);
    }

    #[test]
    fn load_or_init_creates_the_file_once() {
        let dir = tempfile::tempdir().unwrap();
        let first = TokenMap::load_or_init(dir.path()).unwrap();
        let second = TokenMap::load_or_init(dir.path()).unwrap();
        assert_eq!(first.admin_token, second.admin_token);
    }
}
