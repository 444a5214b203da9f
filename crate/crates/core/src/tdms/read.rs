//! Segment-stream decoder.

use std::collections::HashMap;

use super::path::{parse_path, PathTarget};
use super::{
    ChannelData, DataType, TdmsChannel, TdmsError, TdmsFile, TdmsGroup, TdmsProperty, TdmsValue,
    Timestamp, INDEX_NO_RAW_DATA, INDEX_SAME_AS_PREVIOUS, LEAD_IN_LEN, TAG, TOC_BIG_ENDIAN,
    TOC_DAQMX_RAW_DATA, TOC_INTERLEAVED, TOC_META_DATA, TOC_NEW_OBJ_LIST, TOC_RAW_DATA,
};

/// Bounds-checked little-endian reader over a byte slice. Every read is
/// validated against the slice end, so a hostile length field can produce
/// only a `Truncated` error.
struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    context: &'static str,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8], context: &'static str) -> Reader<'a> {
        Reader { buf, pos: 0, context }
    }

    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], TdmsError> {
        if n > self.remaining() {
            return Err(TdmsError::Truncated(format!(
                "{}: wanted {} bytes, {} left",
                self.context,
                n,
                self.remaining()
            )));
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8, TdmsError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, TdmsError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, TdmsError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, TdmsError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn i8(&mut self) -> Result<i8, TdmsError> {
        Ok(self.u8()? as i8)
    }

    fn i16(&mut self) -> Result<i16, TdmsError> {
        Ok(self.u16()? as i16)
    }

    fn i32(&mut self) -> Result<i32, TdmsError> {
        Ok(self.u32()? as i32)
    }

    fn i64(&mut self) -> Result<i64, TdmsError> {
        Ok(self.u64()? as i64)
    }

    fn f32(&mut self) -> Result<f32, TdmsError> {
        Ok(f32::from_bits(self.u32()?))
    }

    fn f64(&mut self) -> Result<f64, TdmsError> {
        Ok(f64::from_bits(self.u64()?))
    }

    fn timestamp(&mut self) -> Result<Timestamp, TdmsError> {
        // little-endian layout stores the fraction word first
        let fractions = self.u64()?;
        let seconds = self.i64()?;
        Ok(Timestamp { seconds, fractions })
    }

    fn string(&mut self) -> Result<String, TdmsError> {
        let len = self.u32()? as usize;
        let bytes = self.take(len)?;
        String::from_utf8(bytes.to_vec())
            .map_err(|_| TdmsError::MalformedMetadata(format!("{}: invalid UTF-8", self.context)))
    }

    fn value(&mut self, dtype: DataType) -> Result<TdmsValue, TdmsError> {
        Ok(match dtype {
            DataType::I8 => TdmsValue::I8(self.i8()?),
            DataType::I16 => TdmsValue::I16(self.i16()?),
            DataType::I32 => TdmsValue::I32(self.i32()?),
            DataType::I64 => TdmsValue::I64(self.i64()?),
            DataType::U8 => TdmsValue::U8(self.u8()?),
            DataType::U16 => TdmsValue::U16(self.u16()?),
            DataType::U32 => TdmsValue::U32(self.u32()?),
            DataType::U64 => TdmsValue::U64(self.u64()?),
            DataType::F32 => TdmsValue::F32(self.f32()?),
            DataType::F64 => TdmsValue::F64(self.f64()?),
            DataType::Boolean => TdmsValue::Boolean(self.u8()? != 0),
            DataType::Timestamp => TdmsValue::Timestamp(self.timestamp()?),
            DataType::String => TdmsValue::String(self.string()?),
        })
    }
}

/// Active raw-data layout for one object, carried across segments.
#[derive(Debug, Clone, Copy)]
struct RawIndex {
    dtype: DataType,
    count: u64,
    /// Bytes of one chunk's worth of this object's data.
    chunk_bytes: u64,
}

#[derive(Debug, Clone)]
struct ObjState {
    has_data: bool,
    index: Option<RawIndex>,
}

struct ModelBuilder {
    file: TdmsFile,
    group_pos: HashMap<String, usize>,
    channel_pos: HashMap<(String, String), (usize, usize)>,
}

impl ModelBuilder {
    fn new() -> ModelBuilder {
        ModelBuilder {
            file: TdmsFile::default(),
            group_pos: HashMap::new(),
            channel_pos: HashMap::new(),
        }
    }

    fn ensure_group(&mut self, name: &str) -> usize {
        if let Some(&i) = self.group_pos.get(name) {
            return i;
        }
        self.file.groups.push(TdmsGroup::new(name));
        let i = self.file.groups.len() - 1;
        self.group_pos.insert(name.to_string(), i);
        i
    }

    fn ensure_channel(&mut self, group: &str, channel: &str) -> (usize, usize) {
        let key = (group.to_string(), channel.to_string());
        if let Some(&pos) = self.channel_pos.get(&key) {
            return pos;
        }
        let gi = self.ensure_group(group);
        // dtype is unknown until an index declares it; f64 is the fallback
        // for channels that only ever carry properties
        self.file.groups[gi]
            .channels
            .push(TdmsChannel::new(channel, ChannelData::F64(Vec::new())));
        let pos = (gi, self.file.groups[gi].channels.len() - 1);
        self.channel_pos.insert(key, pos);
        pos
    }

    fn set_properties(&mut self, target: &PathTarget, props: Vec<TdmsProperty>) {
        let list = match target {
            PathTarget::Root => &mut self.file.properties,
            PathTarget::Group(g) => {
                let gi = self.ensure_group(g);
                &mut self.file.groups[gi].properties
            }
            PathTarget::Channel { group, channel } => {
                let (gi, ci) = self.ensure_channel(group, channel);
                &mut self.file.groups[gi].channels[ci].properties
            }
        };
        for prop in props {
            if let Some(existing) = list.iter_mut().find(|p| p.name == prop.name) {
                existing.value = prop.value;
            } else {
                list.push(prop);
            }
        }
    }

    fn channel_mut(&mut self, group: &str, channel: &str) -> &mut TdmsChannel {
        let (gi, ci) = self.ensure_channel(group, channel);
        &mut self.file.groups[gi].channels[ci]
    }
}

/// Raw-data object bookkeeping carried from segment to segment.
struct ObjectTable {
    order: Vec<String>,
    states: HashMap<String, ObjState>,
}

impl ObjectTable {
    fn new() -> ObjectTable {
        ObjectTable {
            order: Vec::new(),
            states: HashMap::new(),
        }
    }

    fn declare(
        &mut self,
        path: &str,
        has_data: bool,
        index: Option<RawIndex>,
    ) -> Result<(), TdmsError> {
        let state = self.states.entry(path.to_string()).or_insert(ObjState {
            has_data: false,
            index: None,
        });
        state.has_data = has_data;
        match index {
            Some(idx) => state.index = Some(idx),
            None if has_data => {
                // same-as-previous marker without any previous index
                if state.index.is_none() {
                    return Err(TdmsError::MalformedMetadata(format!(
                        "object {path:?} reuses an index but has none"
                    )));
                }
            }
            None => {}
        }
        if !self.order.iter().any(|p| p == path) {
            self.order.push(path.to_string());
        }
        Ok(())
    }
}

/// Decodes a complete TDMS byte stream into its hierarchy, accumulating
/// channel samples across segments.
pub fn parse(bytes: &[u8]) -> Result<TdmsFile, TdmsError> {
    let mut model = ModelBuilder::new();
    let mut table = ObjectTable::new();
    let mut pos = 0usize;

    while pos < bytes.len() {
        pos = parse_segment(bytes, pos, &mut model, &mut table)?;
    }
    Ok(model.file)
}

fn parse_segment(
    bytes: &[u8],
    start: usize,
    model: &mut ModelBuilder,
    table: &mut ObjectTable,
) -> Result<usize, TdmsError> {
    if bytes.len() - start < LEAD_IN_LEN {
        return Err(TdmsError::Truncated(format!(
            "lead-in needs {LEAD_IN_LEN} bytes, {} left",
            bytes.len() - start
        )));
    }
    let mut lead = Reader::new(&bytes[start..start + LEAD_IN_LEN], "lead-in");
    let tag = lead.take(4)?;
    if tag != TAG {
        return Err(TdmsError::BadLeadIn(format!(
            "tag {:?} is not {:?}",
            String::from_utf8_lossy(tag),
            "TDSm"
        )));
    }
    let toc = lead.u32()?;
    if toc & TOC_BIG_ENDIAN != 0 {
        return Err(TdmsError::UnsupportedLayout("big-endian data"));
    }
    if toc & TOC_DAQMX_RAW_DATA != 0 {
        return Err(TdmsError::UnsupportedLayout("DAQmx raw data"));
    }
    if toc & TOC_INTERLEAVED != 0 {
        return Err(TdmsError::UnsupportedLayout("interleaved raw data"));
    }
    let version = lead.u32()?;
    if version != 4712 && version != 4713 {
        return Err(TdmsError::BadLeadIn(format!("unknown version {version}")));
    }
    let next_segment_offset = lead.u64()?;
    let raw_data_offset = lead.u64()?;

    if next_segment_offset == u64::MAX {
        return Err(TdmsError::Truncated(
            "segment marked unfinished (next-segment offset is all ones)".into(),
        ));
    }

    let data_start = start + LEAD_IN_LEN;
    let segment_end = (data_start as u64)
        .checked_add(next_segment_offset)
        .filter(|&end| end <= bytes.len() as u64)
        .ok_or_else(|| {
            TdmsError::Truncated(format!(
                "next-segment offset {next_segment_offset} exceeds file size"
            ))
        })? as usize;
    let raw_start = (data_start as u64)
        .checked_add(raw_data_offset)
        .filter(|&rs| rs <= segment_end as u64)
        .ok_or_else(|| {
            TdmsError::Truncated(format!(
                "raw-data offset {raw_data_offset} exceeds segment length"
            ))
        })? as usize;

    if toc & TOC_META_DATA != 0 {
        if toc & TOC_NEW_OBJ_LIST != 0 {
            table.order.clear();
        }
        parse_metadata(&bytes[data_start..raw_start], model, table)?;
    }

    if toc & TOC_RAW_DATA != 0 {
        parse_raw_data(&bytes[raw_start..segment_end], model, table)?;
    }

    Ok(segment_end)
}

fn parse_metadata(
    meta: &[u8],
    model: &mut ModelBuilder,
    table: &mut ObjectTable,
) -> Result<(), TdmsError> {
    let mut r = Reader::new(meta, "metadata");
    let num_objects = r.u32()?;
    for _ in 0..num_objects {
        let raw_path = r.string()?;
        let target = parse_path(&raw_path)?;

        let index_head = r.u32()?;
        let (has_data, index) = match index_head {
            INDEX_NO_RAW_DATA => (false, None),
            INDEX_SAME_AS_PREVIOUS => (true, None),
            _ => {
                // index_head is the byte length of the index block; the
                // fields that follow are self-describing, so it is not
                // needed for decoding
                let dtype_id = r.u32()?;
                let dtype = DataType::from_id(dtype_id)
                    .ok_or(TdmsError::UnsupportedDtype(dtype_id))?;
                let dimension = r.u32()?;
                if dimension != 1 {
                    return Err(TdmsError::DimensionNotOne(dimension));
                }
                let count = r.u64()?;
                let chunk_bytes = match dtype.fixed_size() {
                    Some(size) => count.checked_mul(size as u64).ok_or_else(|| {
                        TdmsError::MalformedMetadata(format!(
                            "value count {count} overflows for {raw_path:?}"
                        ))
                    })?,
                    None => r.u64()?, // strings declare their total byte size
                };
                (
                    true,
                    Some(RawIndex {
                        dtype,
                        count,
                        chunk_bytes,
                    }),
                )
            }
        };

        if has_data {
            match &target {
                PathTarget::Channel { group, channel } => {
                    if let Some(idx) = &index {
                        prepare_channel_storage(model, group, channel, idx.dtype)?;
                    }
                }
                _ => {
                    return Err(TdmsError::MalformedMetadata(format!(
                        "non-channel object {raw_path:?} declares raw data"
                    )));
                }
            }
        }
        table.declare(&raw_path, has_data, index)?;

        let num_props = r.u32()?;
        let mut props = Vec::with_capacity(num_props.min(1024) as usize);
        for _ in 0..num_props {
            let name = r.string()?;
            if name.is_empty() {
                return Err(TdmsError::MalformedMetadata(
                    "empty property name".into(),
                ));
            }
            let dtype_id = r.u32()?;
            let dtype =
                DataType::from_id(dtype_id).ok_or(TdmsError::UnsupportedDtype(dtype_id))?;
            props.push(TdmsProperty {
                name,
                value: r.value(dtype)?,
            });
        }
        model.set_properties(&target, props);
        // materialize the object even when it carries neither data nor
        // properties, so empty groups and channels survive a round trip
        match &target {
            PathTarget::Group(g) => {
                model.ensure_group(g);
            }
            PathTarget::Channel { group, channel } => {
                model.ensure_channel(group, channel);
            }
            PathTarget::Root => {}
        }
    }
    Ok(())
}

/// Switches an index-less channel shell to the declared dtype, and rejects
/// dtype changes once samples exist.
fn prepare_channel_storage(
    model: &mut ModelBuilder,
    group: &str,
    channel: &str,
    dtype: DataType,
) -> Result<(), TdmsError> {
    let chan = model.channel_mut(group, channel);
    if chan.data.data_type() != dtype {
        if chan.data.is_empty() {
            chan.data = ChannelData::empty(dtype);
        } else {
            return Err(TdmsError::MalformedMetadata(format!(
                "channel {group:?}/{channel:?} changes dtype from {} to {}",
                chan.data.data_type().name(),
                dtype.name()
            )));
        }
    }
    Ok(())
}

fn parse_raw_data(
    data: &[u8],
    model: &mut ModelBuilder,
    table: &ObjectTable,
) -> Result<(), TdmsError> {
    if data.is_empty() {
        return Ok(());
    }
    let mut chunk_bytes = 0u64;
    for path in &table.order {
        let state = &table.states[path];
        if state.has_data {
            let idx = state.index.expect("has_data objects always hold an index");
            chunk_bytes = chunk_bytes.checked_add(idx.chunk_bytes).ok_or_else(|| {
                TdmsError::MalformedMetadata("chunk size overflows".into())
            })?;
        }
    }
    if chunk_bytes == 0 {
        return Err(TdmsError::MalformedMetadata(
            "raw data present but no object declares any".into(),
        ));
    }
    if data.len() as u64 % chunk_bytes != 0 {
        return Err(TdmsError::Truncated(format!(
            "raw data length {} is not a multiple of the chunk size {}",
            data.len(),
            chunk_bytes
        )));
    }
    let num_chunks = data.len() as u64 / chunk_bytes;

    let mut r = Reader::new(data, "raw data");
    for _ in 0..num_chunks {
        for path in &table.order {
            let state = &table.states[path];
            if !state.has_data {
                continue;
            }
            let idx = state.index.expect("has_data objects always hold an index");
            let (group, channel) = match parse_path(path)? {
                PathTarget::Channel { group, channel } => (group, channel),
                _ => unreachable!("raw data declared on non-channel object"),
            };
            read_channel_values(&mut r, model.channel_mut(&group, &channel), idx)?;
        }
    }
    Ok(())
}

fn read_channel_values(
    r: &mut Reader,
    chan: &mut TdmsChannel,
    idx: RawIndex,
) -> Result<(), TdmsError> {
    let n = idx.count as usize;
    match (&mut chan.data, idx.dtype) {
        (ChannelData::I8(v), DataType::I8) => {
            v.reserve(n);
            for _ in 0..n {
                v.push(r.i8()?);
            }
        }
        (ChannelData::I16(v), DataType::I16) => {
            v.reserve(n);
            for _ in 0..n {
                v.push(r.i16()?);
            }
        }
        (ChannelData::I32(v), DataType::I32) => {
            v.reserve(n);
            for _ in 0..n {
                v.push(r.i32()?);
            }
        }
        (ChannelData::I64(v), DataType::I64) => {
            v.reserve(n);
            for _ in 0..n {
                v.push(r.i64()?);
            }
        }
        (ChannelData::U8(v), DataType::U8) => {
            v.extend_from_slice(r.take(n)?);
        }
        (ChannelData::U16(v), DataType::U16) => {
            v.reserve(n);
            for _ in 0..n {
                v.push(r.u16()?);
            }
        }
        (ChannelData::U32(v), DataType::U32) => {
            v.reserve(n);
            for _ in 0..n {
                v.push(r.u32()?);
            }
        }
        (ChannelData::U64(v), DataType::U64) => {
            v.reserve(n);
            for _ in 0..n {
                v.push(r.u64()?);
            }
        }
        (ChannelData::F32(v), DataType::F32) => {
            v.reserve(n);
            for _ in 0..n {
                v.push(r.f32()?);
            }
        }
        (ChannelData::F64(v), DataType::F64) => {
            v.reserve(n);
            for _ in 0..n {
                v.push(r.f64()?);
            }
        }
        (ChannelData::Boolean(v), DataType::Boolean) => {
            v.reserve(n);
            for _ in 0..n {
                v.push(r.u8()? != 0);
            }
        }
        (ChannelData::Timestamp(v), DataType::Timestamp) => {
            v.reserve(n);
            for _ in 0..n {
                v.push(r.timestamp()?);
            }
        }
        (ChannelData::String(v), DataType::String) => {
            read_string_values(r, v, idx)?;
        }
        (data, dtype) => {
            return Err(TdmsError::MalformedMetadata(format!(
                "channel {:?} stores {} but segment declares {}",
                chan.name,
                data.data_type().name(),
                dtype.name()
            )));
        }
    }
    Ok(())
}

/// String raw data: u32 end-offsets for each value, then the concatenated
/// bytes. The index supplies the combined byte length.
fn read_string_values(
    r: &mut Reader,
    out: &mut Vec<String>,
    idx: RawIndex,
) -> Result<(), TdmsError> {
    let mut blob = Reader::new(r.take(idx.chunk_bytes as usize)?, "string data");
    let n = idx.count as usize;
    let offsets_len = n.checked_mul(4).ok_or_else(|| {
        TdmsError::MalformedMetadata("string value count overflows".into())
    })?;
    if offsets_len > idx.chunk_bytes as usize {
        return Err(TdmsError::Truncated(format!(
            "string offsets need {offsets_len} bytes, chunk holds {}",
            idx.chunk_bytes
        )));
    }
    let mut offsets = Vec::with_capacity(n);
    for _ in 0..n {
        offsets.push(blob.u32()? as usize);
    }
    let strings = blob.take(blob.remaining())?;
    let mut prev = 0usize;
    out.reserve(n);
    for off in offsets {
        if off < prev || off > strings.len() {
            return Err(TdmsError::MalformedMetadata(format!(
                "string offset {off} out of order or beyond data ({} bytes)",
                strings.len()
            )));
        }
        let s = String::from_utf8(strings[prev..off].to_vec()).map_err(|_| {
            TdmsError::MalformedMetadata("string sample is not valid UTF-8".into())
        })?;
        out.push(s);
        prev = off;
    }
    Ok(())
}
