use ecolora::analysis::{empirical_contraction_delta, gini};
use ecolora::codec::{
    decode_gaps, decode_message, encode_gaps, encode_message, BitReader, BitWriter, GolombParam,
    MessageHeader, PositionCoding, ValueFormat, WireFormat,
};
use ecolora::model::{build_toy_model, LoraParams};
use ecolora::protocol::{aggregate_segments, assign_segment, partition, SegmentUpload};
use ecolora::sparsifier::{kept_count, sparsify_with_residual, SparseTensor, SparseUpdate};
use proptest::prelude::*;

fn tensor_strategy(id: u16) -> impl Strategy<Value = SparseTensor> {
    (1u32..400).prop_flat_map(move |len| {
        proptest::collection::btree_set(0..len, 0..=len as usize).prop_flat_map(move |set| {
            let positions: Vec<u32> = set.into_iter().collect();
            let n = positions.len();
            proptest::collection::vec(-1e4f32..1e4, n).prop_map(move |values| SparseTensor {
                id,
                dense_len: len,
                positions: positions.clone(),
                values,
            })
        })
    })
}

fn update_strategy() -> impl Strategy<Value = SparseUpdate> {
    (0usize..5)
        .prop_flat_map(|n| (0..n as u16).map(tensor_strategy).collect::<Vec<_>>())
        .prop_map(|tensors| SparseUpdate { tensors })
}

fn format_strategy() -> impl Strategy<Value = WireFormat> {
    (
        prop_oneof![
            Just(PositionCoding::Golomb),
            Just(PositionCoding::Rice),
            Just(PositionCoding::Fixed)
        ],
        prop_oneof![Just(ValueFormat::F16), Just(ValueFormat::F32)],
    )
        .prop_map(|(positions, values)| WireFormat { positions, values })
}

proptest! {
    #[test]
    fn message_round_trip(update in update_strategy(), format in format_strategy(),
                          round: u32, client_id: u32, segment_id: u16) {
        let header = MessageHeader { round, client_id, segment_id };
        let bytes = encode_message(&update, header, format).unwrap();
        let back = decode_message(&bytes).unwrap();
        prop_assert_eq!(back.header, header);
        prop_assert_eq!(back.update.tensors.len(), update.tensors.len());
        for (a, b) in back.update.tensors.iter().zip(&update.tensors) {
            prop_assert_eq!(a.id, b.id);
            prop_assert_eq!(a.dense_len, b.dense_len);
            prop_assert_eq!(&a.positions, &b.positions);
            let q: Vec<u32> = b.values.iter().map(|&v| format.values.quantize(v).to_bits()).collect();
            let got: Vec<u32> = a.values.iter().map(|v| v.to_bits()).collect();
            prop_assert_eq!(got, q);
        }
    }

    #[test]
    fn gap_codes_round_trip(set in proptest::collection::btree_set(0u32..100_000, 0..200), m in 1u32..5000) {
        let positions: Vec<u32> = set.into_iter().collect();
        let m = GolombParam::new(m).unwrap();
        let bytes = encode_gaps(&positions, m).unwrap().into_bytes();
        let mut r = BitReader::new(&bytes);
        prop_assert_eq!(decode_gaps(&mut r, positions.len(), m, 0).unwrap(), positions);
    }

    #[test]
    fn bit_fields_round_trip(fields in proptest::collection::vec((any::<u64>(), 0u32..=64), 0..50)) {
        let mut w = BitWriter::new();
        for &(v, n) in &fields {
            let v = if n == 64 { v } else { v & ((1u64 << n) - 1) };
            w.write_bits(v, n);
        }
        let bytes = w.into_bytes();
        let mut r = BitReader::new(&bytes);
        for &(v, n) in &fields {
            let v = if n == 64 { v } else { v & ((1u64 << n) - 1) };
            prop_assert_eq!(r.read_bits(n), Some(v));
        }
    }

    #[test]
    fn error_feedback_conserves_mass(delta in proptest::collection::vec(-10f32..10.0, 1..300),
                                     old in proptest::collection::vec(-1f32..1.0, 300),
                                     k in 0.01f64..=1.0) {
        let mut residual = old[..delta.len()].to_vec();
        let before: Vec<f32> = delta.iter().zip(&residual).map(|(d, r)| d + r).collect();
        let sent = sparsify_with_residual(0, &delta, &mut residual, k).unwrap();
        prop_assert_eq!(sent.nnz(), kept_count(delta.len(), k));
        let dense = sent.densify();
        for i in 0..delta.len() {
            prop_assert!((dense[i] + residual[i] - before[i]).abs() <= 1e-6);
        }
    }

    #[test]
    fn top_k_contracts_by_at_least_k(x in proptest::collection::vec(-5f32..5.0, 1..500),
                                     k in 0.01f64..=1.0) {
        let mut residual = vec![0.0; x.len()];
        let cx = sparsify_with_residual(0, &x, &mut residual, k).unwrap().densify();
        if let Ok(d) = empirical_contraction_delta([(&x[..], &cx[..])]) {
            prop_assert!(d >= k - 1e-6, "delta {} < k {}", d, k);
        }
    }

    #[test]
    fn flatten_round_trips(seed: u64, rank in 1usize..4) {
        let (p, _) = build_toy_model(&[(6, 5), (4, 6)], rank, 2.0, seed).unwrap();
        let back = LoraParams::from_flat(p.layout().clone(), p.flatten()).unwrap();
        prop_assert_eq!(back, p);
    }

    #[test]
    fn gini_scale_and_permutation_invariant(v in proptest::collection::vec(-100f32..100.0, 1..200),
                                            c in prop_oneof![0.01f32..100.0, -100f32..-0.01],
                                            rot in 0usize..200) {
        let g = gini(&v);
        prop_assert!((0.0..1.0).contains(&g));
        let scaled: Vec<f32> = v.iter().map(|x| x * c).collect();
        prop_assert!((gini(&scaled) - g).abs() < 1e-5);
        let mut rotated = v.clone();
        rotated.rotate_left(rot % v.len());
        prop_assert!((gini(&rotated) - g).abs() < 1e-12);
    }

    #[test]
    fn partition_is_near_equal_and_complete(total in 1usize..100_000, segments in 1usize..64) {
        prop_assume!(segments <= total);
        let p = partition(total, segments).unwrap();
        let sizes = p.sizes();
        prop_assert_eq!(sizes.iter().sum::<usize>(), total);
        let (lo, hi) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
        prop_assert!(hi - lo <= 1);
        prop_assert_eq!(*hi, total.div_ceil(segments));
    }

    #[test]
    fn every_segment_covered(round: u32, segments in 1usize..40, extra in 0usize..40) {
        let participants = segments + extra;
        let mut seen = vec![false; segments];
        for slot in 0..participants {
            seen[assign_segment(slot, round, segments)] = true;
        }
        prop_assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn single_uploader_per_segment_is_verbatim(values in proptest::collection::vec(-1e3f32..1e3, 3..60),
                                               weights in proptest::collection::vec(1u64..1000, 3)) {
        let p = partition(values.len(), 3).unwrap();
        let uploads: Vec<SegmentUpload> = (0..3)
            .map(|s| SegmentUpload {
                client_id: s as u32,
                weight: weights[s],
                segment: s,
                values: values[p.range(s)].to_vec(),
            })
            .collect();
        prop_assert_eq!(aggregate_segments(&p, &uploads).unwrap(), values);
    }
}
