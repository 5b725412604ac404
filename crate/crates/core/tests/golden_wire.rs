//! Byte-exact messages captured from an independent encoder.

use ecolora::codec::{
    decode_message, encode_message, MessageHeader, PositionCoding, ValueFormat, WireFormat,
};
use ecolora::sparsifier::{SparseTensor, SparseUpdate};

fn hex(s: &str) -> Vec<u8> {
    (0..s.len())
        .step_by(2)
        .map(|i| u8::from_str_radix(&s[i..i + 2], 16).unwrap())
        .collect()
}

fn tensor(id: u16, dense_len: u32, positions: &[u32], values: &[f32]) -> SparseTensor {
    SparseTensor {
        id,
        dense_len,
        positions: positions.to_vec(),
        values: values.to_vec(),
    }
}

fn small() -> SparseUpdate {
    SparseUpdate {
        tensors: vec![
            tensor(0, 20, &[1, 4, 5, 13], &[0.5, -1.25, 2.0, 0.1]),
            tensor(1, 8, &[0, 7], &[-0.75, 3.5]),
            tensor(2, 5, &[0, 1, 2, 3, 4], &[1.0, 2.0, 3.0, 4.0, 5.0]),
            tensor(3, 10, &[], &[]),
        ],
    }
}

const RICE_POSITIONS: [u32; 37] = [13, 29, 53, 104, 115, 160, 186, 221, 252, 255, 261, 286, 367, 380, 389, 417, 476, 480, 542, 556, 587, 637, 664, 667, 707, 748, 757, 759, 794, 814, 860, 861, 889, 922, 938, 944, 965];
const RICE_VALUES: [f32; 37] = [2.94, -0.885, 2.095, -3.425, 0.943, -0.441, -2.942, 3.779, -3.957, 2.189, 3.681, -2.673, -2.668, -1.491, -2.409, 3.009, 1.006, -2.547, 3.748, -2.425, 3.721, -0.934, -3.827, -0.681, 3.486, -1.89, -1.345, 2.539, 0.689, 0.768, 1.661, -3.472, -1.157, -1.551, 1.571, -2.522, -0.22];

fn big() -> SparseUpdate {
    SparseUpdate {
        tensors: vec![tensor(6, 1000, &RICE_POSITIONS, &RICE_VALUES)],
    }
}

const SMALL_HEADER: MessageHeader = MessageHeader {
    round: 7,
    client_id: 3,
    segment_id: 2,
};

const BIG_HEADER: MessageHeader = MessageHeader {
    round: 40,
    client_id: 99,
    segment_id: 4,
};

fn fmt(positions: PositionCoding, values: ValueFormat) -> WireFormat {
    WireFormat { positions, values }
}

fn check(update: &SparseUpdate, header: MessageHeader, format: WireFormat, golden: &str) {
    let bytes = encode_message(update, header, format).unwrap();
    assert_eq!(bytes, hex(golden));
    let back = decode_message(&bytes).unwrap();
    assert_eq!(back.header, header);
    for (a, b) in back.update.tensors.iter().zip(&update.tensors) {
        assert_eq!(a.id, b.id);
        assert_eq!(a.positions, b.positions);
        let q: Vec<f32> = b.values.iter().map(|&v| format.values.quantize(v)).collect();
        assert_eq!(a.values, q);
    }
}

#[test]
fn golomb_f16_small() {
    check(
        &small(),
        SMALL_HEADER,
        fmt(PositionCoding::Golomb, ValueFormat::F16),
        concat!(
        "0107000000030000000200040000001400000004000000030001000800000002",
        "000000020002000500000005000000010003000a0000000000000001004cd1c0",
        "1c005e80200017335d0021801e00200021002200228000",
    ),
    );
}

#[test]
fn fixed_f32_small() {
    check(
        &small(),
        SMALL_HEADER,
        fmt(PositionCoding::Fixed, ValueFormat::F32),
        concat!(
        "c107000000030000000200040000001400000004000000000001000800000002",
        "000000000002000500000005000000000003000a000000000000000000000000",
        "0100000004000000050000000d00000000000000073f000000bfa00000400000",
        "003dcccccdbf400000406000003f80000040000000404000004080000040a000",
        "00",
    ),
    );
}

#[test]
fn rice_f16_sparse() {
    check(
        &big(),
        BIG_HEADER,
        fmt(PositionCoding::Rice, ValueFormat::F16),
        concat!(
        "012800000063000000040001000600e80300002500000010006be7e256ca715c",
        "22d1f03115f50fb5b770d42cfa101c51ed05781e5910786ec5100c70b68ee2ed",
        "c3b07890e3f0fa901850d770567055af7df03450814f01b04610dff03690dc6e",
        "de70e9ee5cd0be6fe3ef5850450e60ce894fa970bcaf286f8d0f927042ecc280",
    ),
    );
}

#[test]
fn golomb_f16_sparse() {
    check(
        &big(),
        BIG_HEADER,
        fmt(PositionCoding::Golomb, ValueFormat::F16),
        concat!(
        "012800000063000000040001000600e80300002500000012006bb2ee2b44f7ac",
        "1166f43114f20f9db66da058f22037a1d20a6e3a5890786ec5100c70b68ee2ed",
        "c3b07890e3f0fa901850d770567055af7df03450814f01b04610dff03690dc6e",
        "de70e9ee5cd0be6fe3ef5850450e60ce894fa970bcaf286f8d0f927042ecc280",
    ),
    );
}
