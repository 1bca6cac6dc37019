use thiserror::Error;

use super::{Layer, MountRule, Profile, ProfileError, Protocol, Rule};
use crate::perms::{Perm, PermSet};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("line {line}: syntax error: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: unsupported rule `{text}`")]
    UnsupportedRule { line: usize, text: String },
    #[error("line {line}: {source}")]
    Invalid {
        line: usize,
        #[source]
        source: ProfileError,
    },
}

fn syntax(line: usize, msg: impl Into<String>) -> ParseError {
    ParseError::Syntax {
        line,
        msg: msg.into(),
    }
}

/// Whitespace tokenizer with double-quote grouping.
fn tokens(s: &str, line: usize) -> Result<Vec<String>, ParseError> {
    let mut out = Vec::new();
    let mut chars = s.chars().peekable();
    while let Some(&c) = chars.peek() {
        if c.is_whitespace() {
            chars.next();
            continue;
        }
        let mut tok = String::new();
        while let Some(&c) = chars.peek() {
            if c.is_whitespace() {
                break;
            }
            chars.next();
            if c == '"' {
                let mut closed = false;
                for q in chars.by_ref() {
                    if q == '"' {
                        closed = true;
                        break;
                    }
                    tok.push(q);
                }
                if !closed {
                    return Err(syntax(line, "unterminated quote"));
                }
            } else {
                tok.push(c);
            }
        }
        out.push(tok);
    }
    Ok(out)
}

fn parse_perms(s: &str) -> Option<PermSet> {
    s.parse().ok().filter(|p: &PermSet| !p.is_empty())
}

fn parse_rule(body: &str, line: usize) -> Result<Rule, ParseError> {
    let unsupported = || ParseError::UnsupportedRule {
        line,
        text: body.to_owned(),
    };
    let toks = tokens(body, line)?;
    let Some(head) = toks.first() else {
        return Err(syntax(line, "empty rule"));
    };
    let rest = &toks[1..];
    let rule = match head.as_str() {
        "capability" => match rest {
            // Profiles spell capabilities in lowercase; no case folding here.
            [name] if name.bytes().any(|b| b.is_ascii_uppercase()) => {
                return Err(ParseError::Invalid {
                    line,
                    source: ProfileError::InvalidRule {
                        rule: format!("capability {name}"),
                        reason: "capability names are lowercase".into(),
                    },
                })
            }
            [name] => Rule::Capability {
                capname: name.clone(),
            },
            _ => return Err(unsupported()),
        },
        "network" => match rest {
            [family, sock_type] => Rule::Network {
                family: family.clone(),
                sock_type: sock_type.clone(),
                protocol: None,
            },
            [family, sock_type, proto] => Rule::Network {
                family: family.clone(),
                sock_type: sock_type.clone(),
                protocol: Some(Protocol::from_name(proto).ok_or_else(unsupported)?),
            },
            _ => return Err(unsupported()),
        },
        "mount" => Rule::Mount(parse_mount(rest).ok_or_else(unsupported)?),
        "pivot_root" => {
            let mut oldroot = None;
            let mut newroot = None;
            for t in rest {
                if let Some(o) = t.strip_prefix("oldroot=") {
                    if oldroot.is_some() || newroot.is_some() {
                        return Err(unsupported());
                    }
                    oldroot = Some(o.to_owned());
                } else if newroot.is_none() {
                    newroot = Some(t.clone());
                } else {
                    return Err(unsupported());
                }
            }
            Rule::PivotRoot { oldroot, newroot }
        }
        "link" => match rest {
            [src, arrow, dst] if arrow == "->" => Rule::Link {
                src: src.clone(),
                dst: dst.clone(),
            },
            _ => return Err(unsupported()),
        },
        "deny" => match rest {
            [path, perms] if path.starts_with('/') => Rule::Deny {
                path: path.clone(),
                perms: parse_perms(perms).ok_or_else(unsupported)?,
            },
            _ => return Err(unsupported()),
        },
        path if path.starts_with('/') => match rest {
            [mode] if mode == "ix" => Rule::Execution { path: path.into() },
            [perms] => {
                let perms = parse_perms(perms).ok_or_else(unsupported)?;
                if perms.contains(Perm::Exec) {
                    return Err(unsupported());
                }
                Rule::FileAccess {
                    path: path.into(),
                    perms,
                }
            }
            _ => return Err(unsupported()),
        },
        _ => return Err(unsupported()),
    };
    Ok(rule)
}

fn parse_mount(toks: &[String]) -> Option<MountRule> {
    let mut m = MountRule::default();
    let mut i = 0;
    if let Some(t) = toks.get(i).and_then(|t| t.strip_prefix("fstype=")) {
        m.fstype = Some(t.to_owned());
        i += 1;
    }
    if let Some(o) = toks.get(i).and_then(|t| t.strip_prefix("options=")) {
        let list = match o.strip_prefix('(') {
            Some(inner) => inner.strip_suffix(')')?,
            None => o,
        };
        m.options = Some(list.split(',').map(str::to_owned).collect());
        i += 1;
    }
    match toks.get(i) {
        Some(t) if t != "->" => {
            m.srcname = Some(t.clone());
            i += 1;
        }
        _ => {}
    }
    if toks.get(i).map(String::as_str) == Some("->") {
        m.target = Some(toks.get(i + 1)?.clone());
        i += 2;
    }
    (i == toks.len()).then_some(m)
}

/// Parse the text form produced by [`super::render_profile`].
///
/// The text does not record a layer, so the caller supplies it. Blank lines
/// and `#` comments are ignored.
pub fn parse_profile(text: &str, layer: Layer) -> Result<Profile, ParseError> {
    let mut profile: Option<Profile> = None;
    let mut closed = false;
    let mut last_line = 0;
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        last_line = line;
        let trimmed = raw.trim();
        if trimmed.starts_with("#include") || trimmed.starts_with("include ") {
            return Err(ParseError::UnsupportedRule {
                line,
                text: trimmed.to_owned(),
            });
        }
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if closed {
            return Err(syntax(line, "content after closing brace"));
        }
        match &mut profile {
            None => profile = Some(parse_header(trimmed, line, layer)?),
            Some(p) => {
                if trimmed == "}" {
                    closed = true;
                    continue;
                }
                let body = trimmed
                    .strip_suffix(',')
                    .ok_or_else(|| syntax(line, "rule must end with ','"))?;
                let rule = parse_rule(body.trim_end(), line)?;
                p.insert(rule)
                    .map_err(|source| ParseError::Invalid { line, source })?;
            }
        }
    }
    match profile {
        None => Err(syntax(last_line.max(1), "no profile header")),
        Some(_) if !closed => Err(syntax(last_line.max(1), "missing closing brace")),
        Some(p) => Ok(p),
    }
}

fn parse_header(s: &str, line: usize, layer: Layer) -> Result<Profile, ParseError> {
    let inner = s
        .strip_prefix("profile ")
        .and_then(|r| r.strip_suffix('{'))
        .ok_or_else(|| syntax(line, "expected `profile <name> {`"))?;
    let mut parts = inner.split_whitespace();
    let name = parts
        .next()
        .ok_or_else(|| syntax(line, "missing profile name"))?;
    let invalid = |source| ParseError::Invalid { line, source };
    let mut p = Profile::new(name, layer).map_err(invalid)?;
    if let Some(flags) = parts.next() {
        let list = flags
            .strip_prefix("flags=(")
            .and_then(|f| f.strip_suffix(')'))
            .ok_or_else(|| syntax(line, "expected flags=(...)"))?;
        for f in list.split(',') {
            p.add_flag(f).map_err(invalid)?;
        }
    }
    if parts.next().is_some() {
        return Err(syntax(line, "unexpected tokens in header"));
    }
    Ok(p)
}
