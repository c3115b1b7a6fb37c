//! Reader side: the four-leg REQA/ATQA/SELECT/UID exchange and the back-end
//! access decision.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::channel::{transmit, ChannelConstants, Frame, FrameKind, LinkConditions, Uid};
use crate::error::Result;
use crate::firmware::Card;
use crate::trace::{AccessEvent, EventKind};

/// Anything that answers reader frames over the air.
pub trait Transponder {
    /// Value of the tag/antenna joint sum; zero means the tag is cut off.
    fn gate_value(&self) -> u64;
    fn respond(&self, frame: &Frame) -> Result<Option<Frame>>;
}

impl Transponder for Card {
    fn gate_value(&self) -> u64 {
        self.state().gate_value()
    }

    fn respond(&self, frame: &Frame) -> Result<Option<Frame>> {
        Card::respond(self, frame)
    }
}

/// Ordinary RFID card without a clip joint: always connected, always answers.
/// Used as the clone target.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlainCard {
    pub uid: Uid,
}

impl Transponder for PlainCard {
    fn gate_value(&self) -> u64 {
        1
    }

    fn respond(&self, frame: &Frame) -> Result<Option<Frame>> {
        use crate::channel::Direction;
        frame.validate()?;
        Ok(match frame.kind {
            FrameKind::Reqa => Some(Frame::new(Direction::CardToReader, FrameKind::Atqa, crate::firmware::ATQA.to_vec())),
            FrameKind::Select => Some(Frame::new(Direction::CardToReader, FrameKind::UidResponse, self.uid.as_bytes().to_vec())),
            _ => None,
        })
    }
}

/// One air gap along the path from the reader to the card. A relay attack
/// inserts an extra hop whose far end is an attacker device (gate value 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hop {
    pub link: LinkConditions,
    pub gate_value: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Interrogation {
    pub uid: Option<Uid>,
    /// Card frames that reached the reader.
    pub responses: u32,
    pub events: Vec<AccessEvent>,
}

fn carry(frame: &Frame, hops: &[Hop], constants: &ChannelConstants) -> Result<Option<Frame>> {
    let mut current = frame.clone();
    for hop in hops {
        match transmit(&current, &hop.link, hop.gate_value, constants)? {
            Some(f) => current = f,
            None => return Ok(None),
        }
    }
    Ok(Some(current))
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Reader {
    pub constants: ChannelConstants,
}

impl Reader {
    pub fn new(constants: ChannelConstants) -> Result<Self> {
        constants.validate()?;
        Ok(Self { constants })
    }

    /// Direct interrogation over a single link.
    pub fn interrogate(&self, card: &dyn Transponder, link: LinkConditions, gate_value: u64, clock: u64) -> Result<Interrogation> {
        self.interrogate_path(card, &[Hop { link, gate_value }], clock)
    }

    /// Runs REQA -> ATQA -> SELECT -> UID_RESPONSE through every hop (reader
    /// side first on the way out, card side first on the way back). Any
    /// suppressed leg ends the exchange without a UID.
    pub fn interrogate_path(&self, card: &dyn Transponder, hops: &[Hop], clock: u64) -> Result<Interrogation> {
        let back: Vec<Hop> = hops.iter().rev().copied().collect();
        let mut events = Vec::new();
        let mut responses = 0;
        let mut uid = None;
        'legs: for (request, expected) in [(FrameKind::Reqa, FrameKind::Atqa), (FrameKind::Select, FrameKind::UidResponse)] {
            let out = Frame::request(request);
            let Some(delivered) = carry(&out, hops, &self.constants)? else {
                events.push(AccessEvent::new(clock, EventKind::Interrogation, format!("{request} not delivered; no response")));
                break 'legs;
            };
            events.push(AccessEvent::new(clock, EventKind::Frame, delivered.to_string()));
            let Some(reply) = card.respond(&delivered)? else {
                events.push(AccessEvent::new(clock, EventKind::Interrogation, format!("{request} delivered; card silent")));
                break 'legs;
            };
            let Some(reply) = carry(&reply, &back, &self.constants)? else {
                events.push(AccessEvent::new(clock, EventKind::Interrogation, format!("{} lost on return", reply.kind)));
                break 'legs;
            };
            responses += 1;
            events.push(AccessEvent::new(clock, EventKind::Frame, reply.to_string()));
            if reply.kind != expected {
                break 'legs;
            }
            if reply.kind == FrameKind::UidResponse {
                uid = Some(Uid::new(reply.payload.clone())?);
            }
        }
        if let Some(u) = &uid {
            events.push(AccessEvent::new(clock, EventKind::Interrogation, format!("uid={u}")));
        }
        Ok(Interrogation { uid, responses, events })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Permission {
    Granted,
    Denied,
}

pub type Decision = Permission;

/// UID (hex) to permission, as a JSON object.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AccessControlList {
    pub entries: BTreeMap<Uid, Permission>,
}

impl AccessControlList {
    pub fn granting(uid: Uid) -> Self {
        Self { entries: BTreeMap::from([(uid, Permission::Granted)]) }
    }
}

/// Fail-closed lookup.
pub fn access_decision(uid: Option<&Uid>, acl: &AccessControlList) -> Decision {
    match uid.and_then(|u| acl.entries.get(u)) {
        Some(Permission::Granted) => Permission::Granted,
        _ => Permission::Denied,
    }
}

pub fn decision_event(uid: Option<&Uid>, decision: Decision, clock: u64) -> AccessEvent {
    let who = uid.map_or_else(|| "no uid".to_string(), |u| format!("uid={u}"));
    match decision {
        Permission::Granted => AccessEvent::new(clock, EventKind::AccessGranted, format!("{who} access granted")),
        Permission::Denied => AccessEvent::new(clock, EventKind::AccessDenied, format!("{who} access denied")),
    }
}
