//! Single-segment encoder. Produces little-endian, contiguous raw data that
//! `parse` maps back to an equal model.

use std::collections::HashSet;

use super::path::{channel_path, group_path, ROOT_PATH};
use super::{
    ChannelData, DataType, TdmsError, TdmsFile, TdmsProperty, TdmsValue, Timestamp,
    INDEX_NO_RAW_DATA, TOC_META_DATA, TOC_NEW_OBJ_LIST, TOC_RAW_DATA, TAG, VERSION,
};

fn put_string(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

fn put_timestamp(out: &mut Vec<u8>, ts: Timestamp) {
    out.extend_from_slice(&ts.fractions.to_le_bytes());
    out.extend_from_slice(&ts.seconds.to_le_bytes());
}

fn put_value(out: &mut Vec<u8>, value: &TdmsValue) {
    match value {
        TdmsValue::I8(v) => out.extend_from_slice(&v.to_le_bytes()),
        TdmsValue::I16(v) => out.extend_from_slice(&v.to_le_bytes()),
        TdmsValue::I32(v) => out.extend_from_slice(&v.to_le_bytes()),
        TdmsValue::I64(v) => out.extend_from_slice(&v.to_le_bytes()),
        TdmsValue::U8(v) => out.extend_from_slice(&v.to_le_bytes()),
        TdmsValue::U16(v) => out.extend_from_slice(&v.to_le_bytes()),
        TdmsValue::U32(v) => out.extend_from_slice(&v.to_le_bytes()),
        TdmsValue::U64(v) => out.extend_from_slice(&v.to_le_bytes()),
        TdmsValue::F32(v) => out.extend_from_slice(&v.to_le_bytes()),
        TdmsValue::F64(v) => out.extend_from_slice(&v.to_le_bytes()),
        TdmsValue::Boolean(v) => out.push(*v as u8),
        TdmsValue::Timestamp(ts) => put_timestamp(out, *ts),
        TdmsValue::String(s) => put_string(out, s),
    }
}

fn put_properties(out: &mut Vec<u8>, props: &[TdmsProperty]) -> Result<(), TdmsError> {
    out.extend_from_slice(&(props.len() as u32).to_le_bytes());
    let mut seen = HashSet::new();
    for prop in props {
        if prop.name.is_empty() {
            return Err(TdmsError::InvalidModel("empty property name".into()));
        }
        if !seen.insert(prop.name.as_str()) {
            return Err(TdmsError::InvalidModel(format!(
                "duplicate property {:?}",
                prop.name
            )));
        }
        put_string(out, &prop.name);
        out.extend_from_slice(&prop.value.data_type().id().to_le_bytes());
        put_value(out, &prop.value);
    }
    Ok(())
}

/// Raw-data bytes of one channel plus its declared index block.
fn encode_channel_data(data: &ChannelData) -> (Vec<u8>, Vec<u8>) {
    let mut raw = Vec::new();
    match data {
        ChannelData::I8(v) => v.iter().for_each(|x| raw.extend_from_slice(&x.to_le_bytes())),
        ChannelData::I16(v) => v.iter().for_each(|x| raw.extend_from_slice(&x.to_le_bytes())),
        ChannelData::I32(v) => v.iter().for_each(|x| raw.extend_from_slice(&x.to_le_bytes())),
        ChannelData::I64(v) => v.iter().for_each(|x| raw.extend_from_slice(&x.to_le_bytes())),
        ChannelData::U8(v) => raw.extend_from_slice(v),
        ChannelData::U16(v) => v.iter().for_each(|x| raw.extend_from_slice(&x.to_le_bytes())),
        ChannelData::U32(v) => v.iter().for_each(|x| raw.extend_from_slice(&x.to_le_bytes())),
        ChannelData::U64(v) => v.iter().for_each(|x| raw.extend_from_slice(&x.to_le_bytes())),
        ChannelData::F32(v) => v.iter().for_each(|x| raw.extend_from_slice(&x.to_le_bytes())),
        ChannelData::F64(v) => v.iter().for_each(|x| raw.extend_from_slice(&x.to_le_bytes())),
        ChannelData::Boolean(v) => v.iter().for_each(|x| raw.push(*x as u8)),
        ChannelData::Timestamp(v) => v.iter().for_each(|x| put_timestamp(&mut raw, *x)),
        ChannelData::String(v) => {
            let mut end = 0u32;
            for s in v {
                end += s.len() as u32;
                raw.extend_from_slice(&end.to_le_bytes());
            }
            for s in v {
                raw.extend_from_slice(s.as_bytes());
            }
        }
    }

    let dtype = data.data_type();
    let count = data.len() as u64;
    let mut index = Vec::new();
    // index block length: dtype + dimension + count, plus total size for strings
    let index_len: u32 = if dtype == DataType::String { 28 } else { 20 };
    index.extend_from_slice(&index_len.to_le_bytes());
    index.extend_from_slice(&dtype.id().to_le_bytes());
    index.extend_from_slice(&1u32.to_le_bytes());
    index.extend_from_slice(&count.to_le_bytes());
    if dtype == DataType::String {
        index.extend_from_slice(&(raw.len() as u64).to_le_bytes());
    }
    (index, raw)
}

/// Encodes the model as one TDMS segment.
pub fn write(model: &TdmsFile) -> Result<Vec<u8>, TdmsError> {
    let mut group_names = HashSet::new();
    for group in &model.groups {
        if !group_names.insert(group.name.as_str()) {
            return Err(TdmsError::InvalidModel(format!(
                "duplicate group {:?}",
                group.name
            )));
        }
        let mut channel_names = HashSet::new();
        for chan in &group.channels {
            if !channel_names.insert(chan.name.as_str()) {
                return Err(TdmsError::InvalidModel(format!(
                    "duplicate channel {:?} in group {:?}",
                    chan.name, group.name
                )));
            }
        }
    }

    let mut meta = Vec::new();
    let mut raw = Vec::new();

    let num_objects = 1 + model
        .groups
        .iter()
        .map(|g| 1 + g.channels.len())
        .sum::<usize>();
    meta.extend_from_slice(&(num_objects as u32).to_le_bytes());

    put_string(&mut meta, ROOT_PATH);
    meta.extend_from_slice(&INDEX_NO_RAW_DATA.to_le_bytes());
    put_properties(&mut meta, &model.properties)?;

    for group in &model.groups {
        put_string(&mut meta, &group_path(&group.name));
        meta.extend_from_slice(&INDEX_NO_RAW_DATA.to_le_bytes());
        put_properties(&mut meta, &group.properties)?;

        for chan in &group.channels {
            put_string(&mut meta, &channel_path(&group.name, &chan.name));
            let (index, data) = encode_channel_data(&chan.data);
            meta.extend_from_slice(&index);
            raw.extend_from_slice(&data);
            put_properties(&mut meta, &chan.properties)?;
        }
    }

    let mut toc = TOC_META_DATA | TOC_NEW_OBJ_LIST;
    if !raw.is_empty() {
        toc |= TOC_RAW_DATA;
    }
    let mut out = Vec::with_capacity(28 + meta.len() + raw.len());
    out.extend_from_slice(TAG);
    out.extend_from_slice(&toc.to_le_bytes());
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&((meta.len() + raw.len()) as u64).to_le_bytes());
    out.extend_from_slice(&(meta.len() as u64).to_le_bytes());
    out.extend_from_slice(&meta);
    out.extend_from_slice(&raw);
    Ok(out)
}
