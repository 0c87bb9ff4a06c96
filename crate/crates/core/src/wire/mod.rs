//! Bytes exchanged with a remote viewer: binary frame packets and JSON
//! control messages.

mod control;
mod packet;

pub use self::control::{parse_control, MAX_RADIUS, ControlError, ControlMessage, EnvSelector, ParamsOverride, ServerMessage};
pub use self::packet::{decode_packet, encode_packet, Encoding, FramePacket, PacketError, HEADER_LEN, MAGIC, VERSION};
