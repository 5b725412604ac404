//! Lossless wire coding of sparse updates: gap transform of positions,
//! Golomb codes for the gaps, binary16 values.

pub mod bits;
pub mod golomb;
pub mod wire;

pub use bits::{BitReader, BitWriter};
pub use golomb::{
    decode_gaps, encode_gaps, golomb_param_for, measure_position_cost, rice_param_for,
    GolombParam,
};
pub use wire::{
    decode_message, dump_annotated, encode_message, DecodedMessage, MessageHeader,
    PositionCoding, ValueFormat, WireFormat, HEADER_LEN, PROTOCOL_VERSION, TENSOR_ENTRY_LEN,
};
