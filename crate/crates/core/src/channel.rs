//! Near-field link between reader and card.
//!
//! Coupling falls off with the cube of distance and the cosine of the angle
//! between coil planes. A frame crosses the link only if the card side has a
//! closed joint (non-zero gate value) and the coupling reaches `k_min`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConstants {
    /// Coupling at zero distance, coaxial.
    pub k0: f64,
    /// Distance at which coupling halves, millimetres.
    pub d0: f64,
    /// Minimum coupling that powers the tag.
    pub k_min: f64,
}

impl Default for ChannelConstants {
    fn default() -> Self {
        Self { k0: 0.6, d0: 40.0, k_min: 0.05 }
    }
}

impl ChannelConstants {
    pub fn validate(&self) -> Result<()> {
        ensure(self.k0 > 0.0 && self.k0 <= 1.0, || format!("k0 must lie in (0, 1], got {}", self.k0))?;
        ensure(self.d0 > 0.0 && self.d0.is_finite(), || format!("d0 must be > 0, got {}", self.d0))?;
        ensure((0.0..=1.0).contains(&self.k_min), || {
            format!("k_min must lie in [0, 1], got {}", self.k_min)
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkConditions {
    /// Millimetres.
    pub distance: f64,
    /// Degrees between the coil planes.
    pub angle: f64,
    /// Millimetres. Carried for scenario bookkeeping; does not enter `k`.
    #[serde(default)]
    pub lateral_offset: f64,
}

impl LinkConditions {
    pub fn new(distance: f64, angle: f64) -> Self {
        Self { distance, angle, lateral_offset: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.distance.is_finite() && self.distance >= 0.0, || {
            format!("distance must be >= 0, got {}", self.distance)
        })?;
        ensure((0.0..=90.0).contains(&self.angle), || {
            format!("angle must lie in [0, 90], got {}", self.angle)
        })?;
        ensure(self.lateral_offset.is_finite(), || "lateral_offset must be finite".into())
    }
}

pub const MAX_PAYLOAD: usize = 32;

/// Card identifier returned in the `UID_RESPONSE` frame. Hex in JSON.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Uid(Vec<u8>);

impl Uid {
    pub const MAX_LEN: usize = 10;

    pub fn new(bytes: Vec<u8>) -> Result<Self> {
        ensure((1..=Self::MAX_LEN).contains(&bytes.len()), || {
            format!("uid must be 1..={} bytes, got {}", Self::MAX_LEN, bytes.len())
        })?;
        Ok(Self(bytes))
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }
}

impl std::str::FromStr for Uid {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        let bytes = hex::decode(s).map_err(|e| crate::error::validation(format!("uid {s:?}: {e}")))?;
        Uid::new(bytes)
    }
}

impl TryFrom<String> for Uid {
    type Error = crate::Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Uid> for String {
    fn from(u: Uid) -> Self {
        hex::encode(u.0)
    }
}

impl fmt::Display for Uid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&hex::encode(&self.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    ReaderToCard,
    CardToReader,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FrameKind {
    Reqa,
    Atqa,
    Select,
    UidResponse,
    Halt,
}

impl fmt::Display for FrameKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FrameKind::Reqa => "REQA",
            FrameKind::Atqa => "ATQA",
            FrameKind::Select => "SELECT",
            FrameKind::UidResponse => "UID_RESPONSE",
            FrameKind::Halt => "HALT",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Frame {
    pub direction: Direction,
    pub kind: FrameKind,
    #[serde(with = "hex::serde")]
    pub payload: Vec<u8>,
}

impl Frame {
    pub fn new(direction: Direction, kind: FrameKind, payload: Vec<u8>) -> Self {
        Self { direction, kind, payload }
    }

    pub fn request(kind: FrameKind) -> Self {
        let payload = match kind {
            FrameKind::Reqa => vec![0x26],
            FrameKind::Select => vec![0x93, 0x20],
            FrameKind::Halt => vec![0x50, 0x00],
            _ => Vec::new(),
        };
        Self::new(Direction::ReaderToCard, kind, payload)
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.payload.len() <= MAX_PAYLOAD, || {
            format!("payload of {} bytes exceeds {MAX_PAYLOAD}", self.payload.len())
        })
    }
}

/// `<direction> <KIND> <hex payload>`, as written into traces.
impl fmt::Display for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let dir = match self.direction {
            Direction::ReaderToCard => "reader->card",
            Direction::CardToReader => "card->reader",
        };
        write!(f, "{dir} {} {}", self.kind, hex::encode(&self.payload))
    }
}

pub fn coupling_coefficient(link: &LinkConditions, constants: &ChannelConstants) -> Result<f64> {
    link.validate()?;
    if link.angle >= 90.0 {
        return Ok(0.0);
    }
    let falloff = 1.0 + (link.distance / constants.d0).powi(3);
    Ok(constants.k0 * link.angle.to_radians().cos() / falloff)
}

pub fn tag_powered(k: f64, gate_value: u64, k_min: f64) -> bool {
    gate_value > 0 && k >= k_min
}

/// Delivers the frame unchanged if the tag is powered, otherwise nothing.
pub fn transmit(
    frame: &Frame,
    link: &LinkConditions,
    gate_value: u64,
    constants: &ChannelConstants,
) -> Result<Option<Frame>> {
    frame.validate()?;
    let k = coupling_coefficient(link, constants)?;
    Ok(tag_powered(k, gate_value, constants.k_min).then(|| frame.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k(distance: f64, angle: f64) -> f64 {
        coupling_coefficient(&LinkConditions::new(distance, angle), &ChannelConstants::default()).unwrap()
    }

    #[test]
    fn coupling_examples() {
        assert_eq!(k(0.0, 0.0), 0.6);
        assert_eq!(k(30.0, 90.0), 0.0);
        assert!((k(40.0, 0.0) - 0.30).abs() < 1e-15);
        assert!((k(10.0, 0.0) - 0.5907692307692307).abs() < 1e-15);
    }

    #[test]
    fn invalid_link_rejected() {
        let c = ChannelConstants::default();
        assert!(coupling_coefficient(&LinkConditions::new(-1.0, 0.0), &c).is_err());
        assert!(coupling_coefficient(&LinkConditions::new(1.0, 91.0), &c).is_err());
        assert!(coupling_coefficient(&LinkConditions::new(1.0, -1.0), &c).is_err());
    }

    #[test]
    fn powering_threshold() {
        assert!(!tag_powered(1.0, 0, 0.05));
        assert!(tag_powered(0.05, 1, 0.05));
        assert!(!tag_powered(0.049, 1, 0.05));
    }

    #[test]
    fn transmit_examples() {
        let c = ChannelConstants::default();
        let reqa = Frame::request(FrameKind::Reqa);
        let near = LinkConditions::new(10.0, 0.0);
        assert_eq!(transmit(&reqa, &near, 1, &c).unwrap(), Some(reqa.clone()));
        assert_eq!(transmit(&reqa, &near, 0, &c).unwrap(), None);
        assert_eq!(transmit(&reqa, &LinkConditions::new(10.0, 90.0), 1, &c).unwrap(), None);
    }

    #[test]
    fn oversize_frame_rejected() {
        let f = Frame::new(Direction::CardToReader, FrameKind::UidResponse, vec![0; 33]);
        let r = transmit(&f, &LinkConditions::new(0.0, 0.0), 1, &ChannelConstants::default());
        assert!(r.is_err());
    }

    #[test]
    fn read_range_is_proximity_scale() {
        // k_min reached near 100 mm coaxial: 0.6 / (1 + (d/40)^3) = 0.05  =>  d = 40 * 11^(1/3)
        let edge = 40.0 * 11f64.powf(1.0 / 3.0);
        assert!(k(edge - 0.1, 0.0) >= 0.05);
        assert!(k(edge + 0.1, 0.0) < 0.05);
    }

    #[test]
    fn uid_hex() {
        let uid: Uid = "04a1B2c3".parse().unwrap();
        assert_eq!(uid.as_bytes(), &[0x04, 0xa1, 0xb2, 0xc3]);
        assert_eq!(uid.to_string(), "04a1b2c3");
        assert!("".parse::<Uid>().is_err());
        assert!("zz".parse::<Uid>().is_err());
        assert!("00112233445566778899aa".parse::<Uid>().is_err());
    }

    #[test]
    fn frame_display() {
        assert_eq!(Frame::request(FrameKind::Reqa).to_string(), "reader->card REQA 26");
    }
}
