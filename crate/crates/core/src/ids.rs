//! Typed identifiers for every entity class in the facility model.
//!
//! Ids render as a short prefix plus a decimal counter (`t1`, `sw2`, `d14`).
//! They serialize as those strings so exported documents stay readable and
//! diff-friendly.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid id `{input}`: expected `{prefix}<number>`")]
pub struct IdParseError {
    pub input: String,
    pub prefix: &'static str,
}

macro_rules! id_type {
    ($(#[$meta:meta])* $name:ident, $prefix:literal) => {
        $(#[$meta])*
        #[derive(
            Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
        )]
        #[serde(try_from = "String", into = "String")]
        pub struct $name(pub u32);

        impl $name {
            pub const PREFIX: &'static str = $prefix;

            pub fn index(self) -> u32 {
                self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}{}", $prefix, self.0)
            }
        }

        impl FromStr for $name {
            type Err = IdParseError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                let err = || IdParseError {
                    input: s.to_string(),
                    prefix: $prefix,
                };
                let rest = s.strip_prefix($prefix).ok_or_else(err)?;
                if rest.is_empty() || !rest.bytes().all(|b| b.is_ascii_digit()) {
                    return Err(err());
                }
                rest.parse::<u32>().map($name).map_err(|_| err())
            }
        }

        impl From<$name> for String {
            fn from(id: $name) -> String {
                id.to_string()
            }
        }

        impl TryFrom<String> for $name {
            type Error = IdParseError;

            fn try_from(s: String) -> Result<Self, Self::Error> {
                s.parse()
            }
        }
    };
}

id_type!(SiteId, "site");
id_type!(SwitchId, "sw");
id_type!(DeviceId, "d");
id_type!(PortId, "p");
id_type!(LinkId, "l");
id_type!(TenantId, "t");
id_type!(SessionId, "s");
