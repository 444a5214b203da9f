//! Binary-format tests: a hand-assembled fixture decoded against known
//! values, segment accumulation and carry-over markers, error paths, and
//! randomized round trips, with a cross-check against an independently
//! maintained TDMS reader.

use edgebench_core::tdms::{
    self, channel_data, hierarchy, parse, write, ChannelData, TdmsChannel, TdmsFile, TdmsGroup,
    TdmsProperty, TdmsValue, Timestamp,
};
use proptest::prelude::*;

// ---------------------------------------------------------------------------
// byte-level fixture assembly
// ---------------------------------------------------------------------------

struct Seg {
    toc: u32,
    version: u32,
    meta: Vec<u8>,
    raw: Vec<u8>,
}

const TOC_META: u32 = 1 << 1;
const TOC_NEW_LIST: u32 = 1 << 2;
const TOC_RAW: u32 = 1 << 3;

impl Seg {
    fn new(toc: u32) -> Seg {
        Seg {
            toc,
            version: 4713,
            meta: Vec::new(),
            raw: Vec::new(),
        }
    }

    fn u32(&mut self, v: u32) -> &mut Self {
        self.meta.extend_from_slice(&v.to_le_bytes());
        self
    }

    fn u64(&mut self, v: u64) -> &mut Self {
        self.meta.extend_from_slice(&v.to_le_bytes());
        self
    }

    fn string(&mut self, s: &str) -> &mut Self {
        self.u32(s.len() as u32);
        self.meta.extend_from_slice(s.as_bytes());
        self
    }

    /// Standard fixed-size raw index: length, dtype, dimension, count.
    fn index(&mut self, dtype: u32, count: u64) -> &mut Self {
        self.u32(20).u32(dtype).u32(1).u64(count)
    }

    fn bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(b"TDSm");
        out.extend_from_slice(&self.toc.to_le_bytes());
        out.extend_from_slice(&self.version.to_le_bytes());
        out.extend_from_slice(&((self.meta.len() + self.raw.len()) as u64).to_le_bytes());
        out.extend_from_slice(&(self.meta.len() as u64).to_le_bytes());
        out.extend_from_slice(&self.meta);
        out.extend_from_slice(&self.raw);
        out
    }
}

/// One segment: file property, one group with a property, an f64 channel
/// holding [1.5, -2.5, 3.25] and an i32 channel holding [-1, 0, 7].
fn golden_bytes() -> Vec<u8> {
    let mut seg = Seg::new(TOC_META | TOC_NEW_LIST | TOC_RAW);
    seg.u32(4); // object count

    seg.string("/");
    seg.u32(0xFFFF_FFFF);
    seg.u32(1); // one property
    seg.string("author").u32(0x20);
    seg.string("edgebench");

    seg.string("/'Bridge'");
    seg.u32(0xFFFF_FFFF);
    seg.u32(1);
    seg.string("span").u32(3).u32(7); // i32 property

    seg.string("/'Bridge'/'vgp_7_t'");
    seg.index(10, 3); // f64
    seg.u32(0);

    seg.string("/'Bridge'/'counts'");
    seg.index(3, 3); // i32
    seg.u32(0);

    for v in [1.5f64, -2.5, 3.25] {
        seg.raw.extend_from_slice(&v.to_le_bytes());
    }
    for v in [-1i32, 0, 7] {
        seg.raw.extend_from_slice(&v.to_le_bytes());
    }
    seg.bytes()
}

fn golden_model() -> TdmsFile {
    TdmsFile {
        properties: vec![TdmsProperty {
            name: "author".into(),
            value: TdmsValue::String("edgebench".into()),
        }],
        groups: vec![TdmsGroup {
            name: "Bridge".into(),
            properties: vec![TdmsProperty {
                name: "span".into(),
                value: TdmsValue::I32(7),
            }],
            channels: vec![
                TdmsChannel::new("vgp_7_t", ChannelData::F64(vec![1.5, -2.5, 3.25])),
                TdmsChannel::new("counts", ChannelData::I32(vec![-1, 0, 7])),
            ],
        }],
    }
}

#[test]
fn parses_hand_assembled_fixture() {
    let file = parse(&golden_bytes()).unwrap();
    assert_eq!(file, golden_model());
}

#[test]
fn writer_output_matches_hand_assembled_model() {
    let bytes = write(&golden_model()).unwrap();
    assert_eq!(parse(&bytes).unwrap(), golden_model());
}

#[test]
fn canonicalization_is_idempotent_on_fixture() {
    let first = parse(&golden_bytes()).unwrap();
    let again = parse(&write(&first).unwrap()).unwrap();
    assert_eq!(first, again);
}

#[test]
fn empty_metadata_segment_parses_to_empty_model() {
    let mut seg = Seg::new(TOC_META | TOC_NEW_LIST);
    seg.u32(0);
    let file = parse(&seg.bytes()).unwrap();
    assert!(file.groups.is_empty());
    assert!(file.properties.is_empty());
}

#[test]
fn empty_model_round_trips() {
    let bytes = write(&TdmsFile::default()).unwrap();
    assert_eq!(parse(&bytes).unwrap(), TdmsFile::default());
}

// ---------------------------------------------------------------------------
// multi-segment behaviour
// ---------------------------------------------------------------------------

#[test]
fn samples_accumulate_across_segments() {
    let m1 = golden_model();
    let mut m2 = golden_model();
    m2.groups[0].channels[0].data = ChannelData::F64(vec![9.0, 10.0]);
    m2.groups[0].channels[1].data = ChannelData::I32(vec![100]);

    let mut bytes = write(&m1).unwrap();
    bytes.extend_from_slice(&write(&m2).unwrap());
    let file = parse(&bytes).unwrap();

    assert_eq!(
        channel_data(&file, "Bridge", "vgp_7_t").unwrap(),
        vec![1.5, -2.5, 3.25, 9.0, 10.0]
    );
    assert_eq!(
        channel_data(&file, "Bridge", "counts").unwrap(),
        vec![-1.0, 0.0, 7.0, 100.0]
    );
}

#[test]
fn same_as_previous_index_reuses_layout() {
    let mut first = Seg::new(TOC_META | TOC_NEW_LIST | TOC_RAW);
    first.u32(1);
    first.string("/'g'/'c'");
    first.index(10, 2);
    first.u32(0);
    for v in [1.0f64, 2.0] {
        first.raw.extend_from_slice(&v.to_le_bytes());
    }

    let mut second = Seg::new(TOC_META | TOC_NEW_LIST | TOC_RAW);
    second.u32(1);
    second.string("/'g'/'c'");
    second.u32(0x0000_0000); // same as previous segment
    second.u32(0);
    for v in [3.0f64, 4.0] {
        second.raw.extend_from_slice(&v.to_le_bytes());
    }

    let mut bytes = first.bytes();
    bytes.extend_from_slice(&second.bytes());
    let file = parse(&bytes).unwrap();
    assert_eq!(
        channel_data(&file, "g", "c").unwrap(),
        vec![1.0, 2.0, 3.0, 4.0]
    );
}

#[test]
fn segment_without_metadata_reuses_object_list() {
    let mut first = Seg::new(TOC_META | TOC_NEW_LIST | TOC_RAW);
    first.u32(1);
    first.string("/'g'/'c'");
    first.index(3, 2); // i32 x2
    first.u32(0);
    for v in [5i32, 6] {
        first.raw.extend_from_slice(&v.to_le_bytes());
    }

    // raw-only segment carrying two chunks of the same layout
    let mut second = Seg::new(TOC_RAW);
    for v in [7i32, 8, 9, 10] {
        second.raw.extend_from_slice(&v.to_le_bytes());
    }

    let mut bytes = first.bytes();
    bytes.extend_from_slice(&second.bytes());
    let file = parse(&bytes).unwrap();
    assert_eq!(
        channel_data(&file, "g", "c").unwrap(),
        vec![5.0, 6.0, 7.0, 8.0, 9.0, 10.0]
    );
}

#[test]
fn incremental_metadata_appends_to_carried_list() {
    let mut first = Seg::new(TOC_META | TOC_NEW_LIST | TOC_RAW);
    first.u32(1);
    first.string("/'g'/'a'");
    first.index(10, 1);
    first.u32(0);
    first.raw.extend_from_slice(&1.5f64.to_le_bytes());

    // no new-object-list flag: 'b' joins 'a' instead of replacing it
    let mut second = Seg::new(TOC_META | TOC_RAW);
    second.u32(1);
    second.string("/'g'/'b'");
    second.index(10, 1);
    second.u32(0);
    second.raw.extend_from_slice(&2.5f64.to_le_bytes());
    second.raw.extend_from_slice(&3.5f64.to_le_bytes());

    let mut bytes = first.bytes();
    bytes.extend_from_slice(&second.bytes());
    let file = parse(&bytes).unwrap();
    assert_eq!(channel_data(&file, "g", "a").unwrap(), vec![1.5, 2.5]);
    assert_eq!(channel_data(&file, "g", "b").unwrap(), vec![3.5]);
}

#[test]
fn string_channel_round_trips() {
    let model = TdmsFile {
        properties: vec![],
        groups: vec![TdmsGroup {
            name: "g".into(),
            channels: vec![TdmsChannel::new(
                "s",
                ChannelData::String(vec!["a".into(), "".into(), "longer value".into()]),
            )],
            properties: vec![],
        }],
    };
    assert_eq!(parse(&write(&model).unwrap()).unwrap(), model);
}

#[test]
fn timestamp_field_order_is_fractions_then_seconds() {
    let ts = Timestamp {
        seconds: 0x0102_0304_0506_0708,
        fractions: 0x1112_1314_1516_1718,
    };
    let model = TdmsFile {
        properties: vec![],
        groups: vec![TdmsGroup {
            name: "g".into(),
            channels: vec![TdmsChannel::new("t", ChannelData::Timestamp(vec![ts]))],
            properties: vec![],
        }],
    };
    let bytes = write(&model).unwrap();
    // raw data is the trailing 16 bytes of the single segment
    let raw = &bytes[bytes.len() - 16..];
    assert_eq!(&raw[..8], &ts.fractions.to_le_bytes());
    assert_eq!(&raw[8..], &ts.seconds.to_le_bytes());
    assert_eq!(parse(&bytes).unwrap(), model);
}

// ---------------------------------------------------------------------------
// error paths
// ---------------------------------------------------------------------------

#[test]
fn rejects_bad_tag() {
    let mut bytes = golden_bytes();
    bytes[3] = b'x'; // TDSm -> TDSx
    assert!(matches!(parse(&bytes), Err(tdms::TdmsError::BadLeadIn(_))));
}

#[test]
fn rejects_unsupported_layouts() {
    for (bit, label) in [(1u32 << 6, "big-endian"), (1 << 5, "interleaved"), (1 << 7, "DAQmx")] {
        let mut seg = Seg::new(TOC_META | TOC_NEW_LIST | bit);
        seg.u32(0);
        let err = parse(&seg.bytes()).unwrap_err();
        assert!(
            matches!(err, tdms::TdmsError::UnsupportedLayout(_)),
            "{label}: got {err:?}"
        );
    }
}

#[test]
fn rejects_truncated_segment() {
    let bytes = golden_bytes();
    for cut in [4, 27, 40, bytes.len() - 1] {
        assert!(
            matches!(
                parse(&bytes[..cut]),
                Err(tdms::TdmsError::Truncated(_) | tdms::TdmsError::BadLeadIn(_))
            ),
            "cut at {cut}"
        );
    }
}

#[test]
fn rejects_dimension_other_than_one() {
    let mut seg = Seg::new(TOC_META | TOC_NEW_LIST | TOC_RAW);
    seg.u32(1);
    seg.string("/'g'/'c'");
    seg.u32(20).u32(10).u32(2).u64(1); // dimension 2
    seg.u32(0);
    seg.raw.extend_from_slice(&1.0f64.to_le_bytes());
    assert!(matches!(
        parse(&seg.bytes()),
        Err(tdms::TdmsError::DimensionNotOne(2))
    ));
}

#[test]
fn rejects_malformed_paths() {
    let mut seg = Seg::new(TOC_META | TOC_NEW_LIST);
    seg.u32(1);
    seg.string("not a path");
    seg.u32(0xFFFF_FFFF);
    seg.u32(0);
    assert!(matches!(
        parse(&seg.bytes()),
        Err(tdms::TdmsError::MalformedPath(_))
    ));
}

#[test]
fn rejects_same_as_previous_without_history() {
    let mut seg = Seg::new(TOC_META | TOC_NEW_LIST | TOC_RAW);
    seg.u32(1);
    seg.string("/'g'/'c'");
    seg.u32(0x0000_0000);
    seg.u32(0);
    seg.raw.extend_from_slice(&1.0f64.to_le_bytes());
    assert!(matches!(
        parse(&seg.bytes()),
        Err(tdms::TdmsError::MalformedMetadata(_))
    ));
}

#[test]
fn rejects_unfinished_segment_marker() {
    let mut bytes = Vec::new();
    bytes.extend_from_slice(b"TDSm");
    bytes.extend_from_slice(&(TOC_META).to_le_bytes());
    bytes.extend_from_slice(&4713u32.to_le_bytes());
    bytes.extend_from_slice(&u64::MAX.to_le_bytes());
    bytes.extend_from_slice(&0u64.to_le_bytes());
    assert!(matches!(parse(&bytes), Err(tdms::TdmsError::Truncated(_))));
}

#[test]
fn mutation_smoke_never_panics() {
    use rand::prelude::*;
    let seed_corpus = [golden_bytes(), write(&TdmsFile::default()).unwrap()];
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0xEDBE);
    for _ in 0..2000 {
        let mut bytes = seed_corpus[rng.random_range(0..seed_corpus.len())].clone();
        for _ in 0..rng.random_range(1..8) {
            match rng.random_range(0..3) {
                0 if !bytes.is_empty() => {
                    let i = rng.random_range(0..bytes.len());
                    bytes[i] = rng.random();
                }
                1 => bytes.truncate(rng.random_range(0..=bytes.len())),
                _ => bytes.push(rng.random()),
            }
        }
        let _ = parse(&bytes); // any Ok/Err is fine; a panic fails the test
    }
}

// ---------------------------------------------------------------------------
// randomized round trips
// ---------------------------------------------------------------------------

fn arb_f64() -> impl Strategy<Value = f64> {
    prop_oneof![
        Just(0.0),
        Just(-0.0),
        Just(f64::INFINITY),
        Just(f64::NEG_INFINITY),
        -1e300..1e300
    ]
}

fn arb_f32() -> impl Strategy<Value = f32> {
    prop_oneof![Just(0.0f32), Just(f32::INFINITY), -1e30f32..1e30]
}

fn arb_channel_data() -> impl Strategy<Value = ChannelData> {
    let n = 0..40usize;
    prop_oneof![
        prop::collection::vec(any::<i8>(), n.clone()).prop_map(ChannelData::I8),
        prop::collection::vec(any::<i16>(), n.clone()).prop_map(ChannelData::I16),
        prop::collection::vec(any::<i32>(), n.clone()).prop_map(ChannelData::I32),
        prop::collection::vec(any::<i64>(), n.clone()).prop_map(ChannelData::I64),
        prop::collection::vec(any::<u8>(), n.clone()).prop_map(ChannelData::U8),
        prop::collection::vec(any::<u16>(), n.clone()).prop_map(ChannelData::U16),
        prop::collection::vec(any::<u32>(), n.clone()).prop_map(ChannelData::U32),
        prop::collection::vec(any::<u64>(), n.clone()).prop_map(ChannelData::U64),
        prop::collection::vec(arb_f32(), n.clone()).prop_map(ChannelData::F32),
        prop::collection::vec(arb_f64(), n.clone()).prop_map(ChannelData::F64),
        prop::collection::vec(".{0,12}", n.clone()).prop_map(ChannelData::String),
        prop::collection::vec(any::<bool>(), n.clone()).prop_map(ChannelData::Boolean),
        prop::collection::vec(
            (any::<i64>(), any::<u64>()).prop_map(|(seconds, fractions)| Timestamp {
                seconds,
                fractions
            }),
            n
        )
        .prop_map(ChannelData::Timestamp),
    ]
}

fn arb_value() -> impl Strategy<Value = TdmsValue> {
    prop_oneof![
        any::<i32>().prop_map(TdmsValue::I32),
        any::<u64>().prop_map(TdmsValue::U64),
        arb_f64().prop_map(TdmsValue::F64),
        ".{0,16}".prop_map(TdmsValue::String),
        any::<bool>().prop_map(TdmsValue::Boolean),
        (any::<i64>(), any::<u64>()).prop_map(|(seconds, fractions)| TdmsValue::Timestamp(
            Timestamp { seconds, fractions }
        )),
    ]
}

fn arb_properties() -> impl Strategy<Value = Vec<TdmsProperty>> {
    prop::collection::vec((".{1,8}", arb_value()), 0..3).prop_map(|props| {
        props
            .into_iter()
            .enumerate()
            .map(|(i, (name, value))| TdmsProperty {
                // suffix keeps names unique within the object
                name: format!("{name}_{i}"),
                value,
            })
            .collect()
    })
}

prop_compose! {
    fn arb_group()(
        name in ".{0,10}",
        properties in arb_properties(),
        channels in prop::collection::vec((".{0,10}", arb_channel_data(), arb_properties()), 0..4)
    ) -> TdmsGroup {
        TdmsGroup {
            name,
            properties,
            channels: channels
                .into_iter()
                .enumerate()
                .map(|(i, (name, data, properties))| TdmsChannel {
                    name: format!("{name}_{i}"),
                    data,
                    properties,
                })
                .collect(),
        }
    }
}

fn arb_file() -> impl Strategy<Value = TdmsFile> {
    (arb_properties(), prop::collection::vec(arb_group(), 0..4)).prop_map(
        |(properties, groups)| TdmsFile {
            properties,
            groups: groups
                .into_iter()
                .enumerate()
                .map(|(i, mut g)| {
                    g.name = format!("{}_{i}", g.name);
                    g
                })
                .collect(),
        },
    )
}

proptest! {
    #[test]
    fn round_trip_preserves_model(model in arb_file()) {
        let bytes = write(&model).unwrap();
        let parsed = parse(&bytes).unwrap();
        prop_assert_eq!(parsed, model);
    }

    #[test]
    fn reparse_after_canonicalization_is_stable(model in arb_file()) {
        let original = parse(&write(&model).unwrap()).unwrap();
        let again = parse(&write(&original).unwrap()).unwrap();
        prop_assert_eq!(original, again);
    }

    #[test]
    fn sample_counts_conserved_across_concatenation(model in arb_file(), copies in 1..4usize) {
        let one = write(&model).unwrap();
        let mut bytes = Vec::new();
        for _ in 0..copies {
            bytes.extend_from_slice(&one);
        }
        let parsed = parse(&bytes).unwrap();
        for group in &model.groups {
            for chan in &group.channels {
                let merged = parsed
                    .group(&group.name)
                    .unwrap()
                    .channel(&chan.name)
                    .unwrap();
                prop_assert_eq!(merged.data.len(), chan.data.len() * copies);
            }
        }
    }
}

// ---------------------------------------------------------------------------
// independent reader cross-check
// ---------------------------------------------------------------------------

#[test]
fn independent_reader_accepts_written_file() {
    let model = golden_model();
    let bytes = write(&model).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("golden.tdms");
    std::fs::write(&path, &bytes).unwrap();

    let file = ::tdms::TDMSFile::from_path(&path).expect("independent reader rejected the file");
    let groups = file.groups();
    assert_eq!(groups, vec!["Bridge".to_string()]);

    let channels = file.channels(&groups[0]);
    let chan = channels.get("vgp_7_t").expect("channel missing");
    let values: Vec<f64> = file
        .channel_data_double_float(chan)
        .unwrap()
        .collect();
    let expected = match &model.groups[0].channels[0].data {
        ChannelData::F64(v) => v.clone(),
        _ => unreachable!(),
    };
    assert_eq!(values.len(), expected.len());
    for (a, b) in values.iter().zip(&expected) {
        assert_eq!(a.to_bits(), b.to_bits(), "bit-exact mismatch");
    }
}

#[test]
fn hierarchy_listing_shape() {
    let file = parse(&golden_bytes()).unwrap();
    let lines = hierarchy(&file);
    assert_eq!(lines.len(), 1 + 1 + 2);
    assert!(lines[0].starts_with("file: 1 group(s)"));
    assert!(lines[1].contains("group 'Bridge'"));
    assert!(lines[2].contains("channel 'vgp_7_t'"));
}
