//! Reader and writer for a subset of the TDMS measurement-file format:
//! little-endian, contiguous (non-interleaved) raw data, standard scalar
//! types, single-dimension arrays. Big-endian, interleaved and DAQmx
//! layouts are rejected with explicit errors.
//!
//! A file holds groups, a group holds channels, and properties can be
//! attached at every level. Channel samples accumulate across segments.

mod path;
mod read;
mod write;

pub use path::{channel_path, group_path, parse_path, PathTarget, ROOT_PATH};
pub use read::parse;
pub use write::write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Binary type ids from the vendor format specification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[repr(u32)]
pub enum DataType {
    I8 = 1,
    I16 = 2,
    I32 = 3,
    I64 = 4,
    U8 = 5,
    U16 = 6,
    U32 = 7,
    U64 = 8,
    F32 = 9,
    F64 = 10,
    String = 0x20,
    Boolean = 0x21,
    Timestamp = 0x44,
}

impl DataType {
    pub fn from_id(id: u32) -> Option<DataType> {
        Some(match id {
            1 => DataType::I8,
            2 => DataType::I16,
            3 => DataType::I32,
            4 => DataType::I64,
            5 => DataType::U8,
            6 => DataType::U16,
            7 => DataType::U32,
            8 => DataType::U64,
            9 => DataType::F32,
            10 => DataType::F64,
            0x20 => DataType::String,
            0x21 => DataType::Boolean,
            0x44 => DataType::Timestamp,
            _ => return None,
        })
    }

    pub fn id(self) -> u32 {
        self as u32
    }

    /// On-disk size of one value; None for variable-length strings.
    pub fn fixed_size(self) -> Option<usize> {
        Some(match self {
            DataType::I8 | DataType::U8 | DataType::Boolean => 1,
            DataType::I16 | DataType::U16 => 2,
            DataType::I32 | DataType::U32 | DataType::F32 => 4,
            DataType::I64 | DataType::U64 | DataType::F64 => 8,
            DataType::Timestamp => 16,
            DataType::String => return None,
        })
    }

    pub fn is_numeric(self) -> bool {
        !matches!(
            self,
            DataType::String | DataType::Boolean | DataType::Timestamp
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            DataType::I8 => "i8",
            DataType::I16 => "i16",
            DataType::I32 => "i32",
            DataType::I64 => "i64",
            DataType::U8 => "u8",
            DataType::U16 => "u16",
            DataType::U32 => "u32",
            DataType::U64 => "u64",
            DataType::F32 => "f32",
            DataType::F64 => "f64",
            DataType::String => "string",
            DataType::Boolean => "bool",
            DataType::Timestamp => "timestamp",
        }
    }
}

/// Seconds since 1904-01-01T00:00:00 UTC plus positive 2^-64 fractions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Timestamp {
    pub seconds: i64,
    pub fractions: u64,
}

/// A property value or single sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TdmsValue {
    I8(i8),
    I16(i16),
    I32(i32),
    I64(i64),
    U8(u8),
    U16(u16),
    U32(u32),
    U64(u64),
    F32(f32),
    F64(f64),
    String(String),
    Boolean(bool),
    Timestamp(Timestamp),
}

impl TdmsValue {
    pub fn data_type(&self) -> DataType {
        match self {
            TdmsValue::I8(_) => DataType::I8,
            TdmsValue::I16(_) => DataType::I16,
            TdmsValue::I32(_) => DataType::I32,
            TdmsValue::I64(_) => DataType::I64,
            TdmsValue::U8(_) => DataType::U8,
            TdmsValue::U16(_) => DataType::U16,
            TdmsValue::U32(_) => DataType::U32,
            TdmsValue::U64(_) => DataType::U64,
            TdmsValue::F32(_) => DataType::F32,
            TdmsValue::F64(_) => DataType::F64,
            TdmsValue::String(_) => DataType::String,
            TdmsValue::Boolean(_) => DataType::Boolean,
            TdmsValue::Timestamp(_) => DataType::Timestamp,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TdmsProperty {
    pub name: String,
    pub value: TdmsValue,
}

/// Homogeneous sample storage; the variant is the channel's dtype.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ChannelData {
    I8(Vec<i8>),
    I16(Vec<i16>),
    I32(Vec<i32>),
    I64(Vec<i64>),
    U8(Vec<u8>),
    U16(Vec<u16>),
    U32(Vec<u32>),
    U64(Vec<u64>),
    F32(Vec<f32>),
    F64(Vec<f64>),
    String(Vec<String>),
    Boolean(Vec<bool>),
    Timestamp(Vec<Timestamp>),
}

impl ChannelData {
    pub fn empty(dtype: DataType) -> ChannelData {
        match dtype {
            DataType::I8 => ChannelData::I8(Vec::new()),
            DataType::I16 => ChannelData::I16(Vec::new()),
            DataType::I32 => ChannelData::I32(Vec::new()),
            DataType::I64 => ChannelData::I64(Vec::new()),
            DataType::U8 => ChannelData::U8(Vec::new()),
            DataType::U16 => ChannelData::U16(Vec::new()),
            DataType::U32 => ChannelData::U32(Vec::new()),
            DataType::U64 => ChannelData::U64(Vec::new()),
            DataType::F32 => ChannelData::F32(Vec::new()),
            DataType::F64 => ChannelData::F64(Vec::new()),
            DataType::String => ChannelData::String(Vec::new()),
            DataType::Boolean => ChannelData::Boolean(Vec::new()),
            DataType::Timestamp => ChannelData::Timestamp(Vec::new()),
        }
    }

    pub fn data_type(&self) -> DataType {
        match self {
            ChannelData::I8(_) => DataType::I8,
            ChannelData::I16(_) => DataType::I16,
            ChannelData::I32(_) => DataType::I32,
            ChannelData::I64(_) => DataType::I64,
            ChannelData::U8(_) => DataType::U8,
            ChannelData::U16(_) => DataType::U16,
            ChannelData::U32(_) => DataType::U32,
            ChannelData::U64(_) => DataType::U64,
            ChannelData::F32(_) => DataType::F32,
            ChannelData::F64(_) => DataType::F64,
            ChannelData::String(_) => DataType::String,
            ChannelData::Boolean(_) => DataType::Boolean,
            ChannelData::Timestamp(_) => DataType::Timestamp,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            ChannelData::I8(v) => v.len(),
            ChannelData::I16(v) => v.len(),
            ChannelData::I32(v) => v.len(),
            ChannelData::I64(v) => v.len(),
            ChannelData::U8(v) => v.len(),
            ChannelData::U16(v) => v.len(),
            ChannelData::U32(v) => v.len(),
            ChannelData::U64(v) => v.len(),
            ChannelData::F32(v) => v.len(),
            ChannelData::F64(v) => v.len(),
            ChannelData::String(v) => v.len(),
            ChannelData::Boolean(v) => v.len(),
            ChannelData::Timestamp(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TdmsChannel {
    pub name: String,
    pub data: ChannelData,
    pub properties: Vec<TdmsProperty>,
}

impl TdmsChannel {
    pub fn new(name: impl Into<String>, data: ChannelData) -> TdmsChannel {
        TdmsChannel {
            name: name.into(),
            data,
            properties: Vec::new(),
        }
    }

    pub fn property(&self, name: &str) -> Option<&TdmsValue> {
        self.properties
            .iter()
            .find(|p| p.name == name)
            .map(|p| &p.value)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TdmsGroup {
    pub name: String,
    pub channels: Vec<TdmsChannel>,
    pub properties: Vec<TdmsProperty>,
}

impl TdmsGroup {
    pub fn new(name: impl Into<String>) -> TdmsGroup {
        TdmsGroup {
            name: name.into(),
            ..TdmsGroup::default()
        }
    }

    pub fn channel(&self, name: &str) -> Option<&TdmsChannel> {
        self.channels.iter().find(|c| c.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TdmsFile {
    pub properties: Vec<TdmsProperty>,
    pub groups: Vec<TdmsGroup>,
}

impl TdmsFile {
    pub fn group(&self, name: &str) -> Option<&TdmsGroup> {
        self.groups.iter().find(|g| g.name == name)
    }
}

const LEAD_IN_LEN: usize = 28;
const TAG: &[u8; 4] = b"TDSm";
const VERSION: u32 = 4713;

const TOC_META_DATA: u32 = 1 << 1;
const TOC_NEW_OBJ_LIST: u32 = 1 << 2;
const TOC_RAW_DATA: u32 = 1 << 3;
const TOC_INTERLEAVED: u32 = 1 << 5;
const TOC_BIG_ENDIAN: u32 = 1 << 6;
const TOC_DAQMX_RAW_DATA: u32 = 1 << 7;

const INDEX_NO_RAW_DATA: u32 = 0xFFFF_FFFF;
const INDEX_SAME_AS_PREVIOUS: u32 = 0x0000_0000;

/// Largest integer magnitude guaranteed exact in an f64.
const F64_EXACT_INT_BOUND: u64 = 1 << 53;

#[derive(Debug, Error)]
pub enum TdmsError {
    #[error("bad lead-in: {0}")]
    BadLeadIn(String),
    #[error("unsupported layout: {0}")]
    UnsupportedLayout(&'static str),
    #[error("truncated file: {0}")]
    Truncated(String),
    #[error("malformed object path {0:?}")]
    MalformedPath(String),
    #[error("array dimension {0} (only 1 supported)")]
    DimensionNotOne(u32),
    #[error("unsupported data type id {0:#x}")]
    UnsupportedDtype(u32),
    #[error("malformed metadata: {0}")]
    MalformedMetadata(String),
    #[error("no channel {group:?}/{channel:?}")]
    NotFound { group: String, channel: String },
    #[error("channel {group:?}/{channel:?} has non-numeric type {dtype}")]
    NonNumericChannel {
        group: String,
        channel: String,
        dtype: &'static str,
    },
    #[error("64-bit value {value} exceeds exact f64 range")]
    LossyWidening { value: String },
    #[error("invalid model: {0}")]
    InvalidModel(String),
}

/// Samples of a numeric channel widened losslessly to f64.
pub fn channel_data(file: &TdmsFile, group: &str, channel: &str) -> Result<Vec<f64>, TdmsError> {
    let not_found = || TdmsError::NotFound {
        group: group.to_string(),
        channel: channel.to_string(),
    };
    let chan = file
        .group(group)
        .ok_or_else(not_found)?
        .channel(channel)
        .ok_or_else(not_found)?;

    let widen_i64 = |v: i64| -> Result<f64, TdmsError> {
        if v.unsigned_abs() > F64_EXACT_INT_BOUND {
            Err(TdmsError::LossyWidening {
                value: v.to_string(),
            })
        } else {
            Ok(v as f64)
        }
    };
    let widen_u64 = |v: u64| -> Result<f64, TdmsError> {
        if v > F64_EXACT_INT_BOUND {
            Err(TdmsError::LossyWidening {
                value: v.to_string(),
            })
        } else {
            Ok(v as f64)
        }
    };

    match &chan.data {
        ChannelData::I8(v) => Ok(v.iter().map(|&x| x as f64).collect()),
        ChannelData::I16(v) => Ok(v.iter().map(|&x| x as f64).collect()),
        ChannelData::I32(v) => Ok(v.iter().map(|&x| x as f64).collect()),
        ChannelData::U8(v) => Ok(v.iter().map(|&x| x as f64).collect()),
        ChannelData::U16(v) => Ok(v.iter().map(|&x| x as f64).collect()),
        ChannelData::U32(v) => Ok(v.iter().map(|&x| x as f64).collect()),
        ChannelData::F32(v) => Ok(v.iter().map(|&x| x as f64).collect()),
        ChannelData::F64(v) => Ok(v.clone()),
        ChannelData::I64(v) => v.iter().map(|&x| widen_i64(x)).collect(),
        ChannelData::U64(v) => v.iter().map(|&x| widen_u64(x)).collect(),
        other => Err(TdmsError::NonNumericChannel {
            group: group.to_string(),
            channel: channel.to_string(),
            dtype: other.data_type().name(),
        }),
    }
}

fn property_names(props: &[TdmsProperty]) -> String {
    props
        .iter()
        .map(|p| p.name.as_str())
        .collect::<Vec<_>>()
        .join(", ")
}

/// Text listing of the file/group/channel hierarchy, in file order.
pub fn hierarchy(file: &TdmsFile) -> Vec<String> {
    let mut lines = Vec::new();
    let mut header = format!("file: {} group(s)", file.groups.len());
    if !file.properties.is_empty() {
        header.push_str(&format!(", properties: {}", property_names(&file.properties)));
    }
    lines.push(header);
    for group in &file.groups {
        let mut line = format!("group '{}': {} channel(s)", group.name, group.channels.len());
        if !group.properties.is_empty() {
            line.push_str(&format!(", properties: {}", property_names(&group.properties)));
        }
        lines.push(line);
        for chan in &group.channels {
            let mut line = format!(
                "  channel '{}': {}[{}]",
                chan.name,
                chan.data.data_type().name(),
                chan.data.len()
            );
            if !chan.properties.is_empty() {
                line.push_str(&format!(", properties: {}", property_names(&chan.properties)));
            }
            lines.push(line);
        }
    }
    lines
}
