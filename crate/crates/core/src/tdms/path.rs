//! Object paths: `/` for the file, `/'Group'` and `/'Group'/'Channel'` below
//! it, with single quotes inside names doubled.

use super::TdmsError;

pub const ROOT_PATH: &str = "/";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PathTarget {
    Root,
    Group(String),
    Channel { group: String, channel: String },
}

fn quote(name: &str) -> String {
    format!("'{}'", name.replace('\'', "''"))
}

pub fn group_path(group: &str) -> String {
    format!("/{}", quote(group))
}

pub fn channel_path(group: &str, channel: &str) -> String {
    format!("/{}/{}", quote(group), quote(channel))
}

/// Parses an on-disk object path into its target.
pub fn parse_path(path: &str) -> Result<PathTarget, TdmsError> {
    let err = || TdmsError::MalformedPath(path.to_string());
    if path == ROOT_PATH {
        return Ok(PathTarget::Root);
    }
    let rest = path.strip_prefix('/').ok_or_else(err)?;
    let (group, rest) = take_quoted(rest).ok_or_else(err)?;
    if rest.is_empty() {
        return Ok(PathTarget::Group(group));
    }
    let rest = rest.strip_prefix('/').ok_or_else(err)?;
    let (channel, rest) = take_quoted(rest).ok_or_else(err)?;
    if !rest.is_empty() {
        return Err(err());
    }
    Ok(PathTarget::Channel { group, channel })
}

/// Consumes one `'...'` component, un-doubling embedded quotes.
fn take_quoted(s: &str) -> Option<(String, &str)> {
    let rest = s.strip_prefix('\'')?;
    let mut name = String::new();
    let bytes = rest.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'\'' {
            if bytes.get(i + 1) == Some(&b'\'') {
                name.push('\'');
                i += 2;
            } else {
                // closing quote
                return Some((name, &rest[i + 1..]));
            }
        } else {
            let ch = rest[i..].chars().next()?;
            name.push(ch);
            i += ch.len_utf8();
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips() {
        assert_eq!(parse_path("/").unwrap(), PathTarget::Root);
        assert_eq!(
            parse_path(&group_path("Bridge")).unwrap(),
            PathTarget::Group("Bridge".into())
        );
        assert_eq!(
            parse_path(&channel_path("Bridge", "vgp_7_t")).unwrap(),
            PathTarget::Channel {
                group: "Bridge".into(),
                channel: "vgp_7_t".into()
            }
        );
    }

    #[test]
    fn quote_escaping() {
        let p = channel_path("it's", "a 'test'");
        assert_eq!(p, "/'it''s'/'a ''test'''");
        assert_eq!(
            parse_path(&p).unwrap(),
            PathTarget::Channel {
                group: "it's".into(),
                channel: "a 'test'".into()
            }
        );
    }

    #[test]
    fn empty_names_allowed() {
        assert_eq!(parse_path("/''").unwrap(), PathTarget::Group(String::new()));
    }

    #[test]
    fn malformed_paths_rejected() {
        for bad in ["", "x", "/x", "/'a", "/'a'x", "/'a'/'b'/'c'", "/'a'/b", "//"] {
            assert!(
                matches!(parse_path(bad), Err(TdmsError::MalformedPath(_))),
                "should reject {bad:?}"
            );
        }
    }
}
