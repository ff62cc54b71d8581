use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::Error;

/// The six embedding-transformation variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Encoder and speaker predictor only.
    Nldr,
    /// Adds the decoder and the two disentanglers.
    Uai,
    /// Encoder, predictor and a group discriminator trained jointly with the predictor.
    Mtl,
    /// Encoder, predictor and an adversarial group discriminator.
    At,
    UaiAt,
    UaiMtl,
}

/// Which branch the group discriminator's parameters belong to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    None,
    PrimaryBranch,
    SecondaryBranch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModeActivity {
    pub encoder: bool,
    pub predictor: bool,
    pub decoder: bool,
    pub disentangler: bool,
    pub discriminator: bool,
    pub placement: Placement,
}

impl Mode {
    pub const ALL: [Mode; 6] = [Mode::Nldr, Mode::Uai, Mode::Mtl, Mode::At, Mode::UaiAt, Mode::UaiMtl];

    pub fn activity(self) -> ModeActivity {
        let uai = matches!(self, Mode::Uai | Mode::UaiAt | Mode::UaiMtl);
        let placement = match self {
            Mode::Nldr | Mode::Uai => Placement::None,
            Mode::Mtl | Mode::UaiMtl => Placement::PrimaryBranch,
            Mode::At | Mode::UaiAt => Placement::SecondaryBranch,
        };
        ModeActivity {
            encoder: true,
            predictor: true,
            decoder: uai,
            disentangler: uai,
            discriminator: placement != Placement::None,
            placement,
        }
    }

    /// Whether the mode has anything to update in a secondary step.
    pub fn has_secondary(self) -> bool {
        let a = self.activity();
        a.disentangler || a.placement == Placement::SecondaryBranch
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Nldr => "nldr",
            Mode::Uai => "uai",
            Mode::Mtl => "mtl",
            Mode::At => "at",
            Mode::UaiAt => "uai-at",
            Mode::UaiMtl => "uai-mtl",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let norm = s.trim().to_ascii_lowercase().replace('_', "-");
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == norm)
            .ok_or_else(|| Error::param(format!("unknown mode '{s}' (expected one of nldr, uai, mtl, at, uai-at, uai-mtl)")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn activity_table() {
        // encoder, predictor, decoder, disentangler, discriminator
        let rows = [
            (Mode::Nldr, [true, true, false, false, false], Placement::None),
            (Mode::Uai, [true, true, true, true, false], Placement::None),
            (Mode::Mtl, [true, true, false, false, true], Placement::PrimaryBranch),
            (Mode::At, [true, true, false, false, true], Placement::SecondaryBranch),
            (Mode::UaiAt, [true, true, true, true, true], Placement::SecondaryBranch),
            (Mode::UaiMtl, [true, true, true, true, true], Placement::PrimaryBranch),
        ];
        for (mode, flags, placement) in rows {
            let a = mode.activity();
            assert_eq!([a.encoder, a.predictor, a.decoder, a.disentangler, a.discriminator], flags, "{mode}");
            assert_eq!(a.placement, placement, "{mode}");
        }
    }

    #[test]
    fn secondary_branch_presence() {
        let with: Vec<Mode> = Mode::ALL.into_iter().filter(|m| m.has_secondary()).collect();
        assert_eq!(with, [Mode::Uai, Mode::At, Mode::UaiAt, Mode::UaiMtl]);
    }

    #[test]
    fn parse_names() {
        for m in Mode::ALL {
            assert_eq!(m.as_str().parse::<Mode>().unwrap(), m);
        }
        assert_eq!("UAI_MTL".parse::<Mode>().unwrap(), Mode::UaiMtl);
        assert!("foo".parse::<Mode>().is_err());
        assert_eq!(serde_json::to_string(&Mode::UaiAt).unwrap(), "\"uai-at\"");
    }
}
