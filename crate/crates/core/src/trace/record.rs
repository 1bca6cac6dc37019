use std::fmt;

use super::TraceError;

/// Literal used in trace fields that carry no value.
pub const PLACEHOLDER: &str = "-";

const FIELD_COUNT: usize = 6;

/// One kernel-operation line from the tracing script.
///
/// Field order on the wire: probe point, cgroup path, executable process
/// name, executable path, resource path, mount-namespace root.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TraceRecord {
    probe_point: String,
    cgroup_path: String,
    exec_name: String,
    exec_path: String,
    resource_path: String,
    mntns_root: String,
}

fn is_placeholder(s: &str) -> bool {
    s == PLACEHOLDER
}

impl TraceRecord {
    pub fn new(
        probe_point: impl Into<String>,
        cgroup_path: impl Into<String>,
        exec_name: impl Into<String>,
        exec_path: impl Into<String>,
        resource_path: impl Into<String>,
        mntns_root: impl Into<String>,
    ) -> Result<Self, TraceError> {
        let rec = TraceRecord {
            probe_point: probe_point.into(),
            cgroup_path: cgroup_path.into(),
            exec_name: exec_name.into(),
            exec_path: exec_path.into(),
            resource_path: resource_path.into(),
            mntns_root: mntns_root.into(),
        };
        rec.validate()?;
        Ok(rec)
    }

    fn validate(&self) -> Result<(), TraceError> {
        let fields = [
            ("probe_point", &self.probe_point),
            ("cgroup_path", &self.cgroup_path),
            ("exec_name", &self.exec_name),
            ("exec_path", &self.exec_path),
            ("resource_path", &self.resource_path),
            ("mntns_root", &self.mntns_root),
        ];
        for (name, value) in fields {
            if value.is_empty() {
                return Err(TraceError::malformed(format!("field {name} is empty")));
            }
            if value.chars().any(|c| c == '\t' || c == '\n' || c == '\r') {
                return Err(TraceError::malformed(format!(
                    "field {name} contains a tab or line break"
                )));
            }
        }
        if self.probe_point.chars().any(char::is_whitespace) {
            return Err(TraceError::malformed("probe point contains whitespace"));
        }
        for (name, value) in [
            ("cgroup_path", &self.cgroup_path),
            ("exec_path", &self.exec_path),
            ("resource_path", &self.resource_path),
            ("mntns_root", &self.mntns_root),
        ] {
            if !is_placeholder(value) && !value.starts_with('/') {
                return Err(TraceError::InvalidPath {
                    field: name,
                    value: value.clone(),
                });
            }
        }
        if is_placeholder(&self.exec_name) && is_placeholder(&self.exec_path) {
            return Err(TraceError::malformed(
                "exec_name and exec_path are both unavailable",
            ));
        }
        Ok(())
    }

    pub fn probe_point(&self) -> &str {
        &self.probe_point
    }

    pub fn cgroup_path(&self) -> &str {
        &self.cgroup_path
    }

    pub fn exec_name(&self) -> &str {
        &self.exec_name
    }

    pub fn exec_path(&self) -> &str {
        &self.exec_path
    }

    pub fn resource_path(&self) -> &str {
        &self.resource_path
    }

    pub fn mntns_root(&self) -> &str {
        &self.mntns_root
    }

    /// `exec_path` unless it is the placeholder.
    pub fn exec_path_opt(&self) -> Option<&str> {
        Some(self.exec_path.as_str()).filter(|s| !is_placeholder(s))
    }

    pub fn resource_path_opt(&self) -> Option<&str> {
        Some(self.resource_path.as_str()).filter(|s| !is_placeholder(s))
    }

    pub fn mntns_root_opt(&self) -> Option<&str> {
        Some(self.mntns_root.as_str()).filter(|s| !is_placeholder(s))
    }

    /// Serialize back to the tab-separated wire form, without a line terminator.
    pub fn render_line(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for TraceRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}\t{}\t{}\t{}\t{}\t{}",
            self.probe_point,
            self.cgroup_path,
            self.exec_name,
            self.exec_path,
            self.resource_path,
            self.mntns_root
        )
    }
}

/// Parse one line of the six-field trace format. A single trailing `\n` or
/// `\r\n` is tolerated.
pub fn parse_trace_line(line: &str) -> Result<TraceRecord, TraceError> {
    let line = line
        .strip_suffix('\n')
        .map(|l| l.strip_suffix('\r').unwrap_or(l))
        .unwrap_or(line);
    if line.is_empty() {
        return Err(TraceError::malformed("empty line"));
    }
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != FIELD_COUNT {
        return Err(TraceError::malformed(format!(
            "expected {FIELD_COUNT} tab-separated fields, found {}",
            fields.len()
        )));
    }
    TraceRecord::new(
        fields[0], fields[1], fields[2], fields[3], fields[4], fields[5],
    )
}

/// Inverse of [`parse_trace_line`].
pub fn render_trace_line(rec: &TraceRecord) -> String {
    rec.render_line()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const PIVOT: &str = "security_sb_pivotroot\t/docker/abc\trunc:[2:INIT]\t-\t/var/lib/docker/overlay2/x/merged\t/var/lib/docker/overlay2/x/merged";

    #[test]
    fn parses_runc_init_pivot_root() {
        let rec = parse_trace_line(PIVOT).unwrap();
        assert_eq!(rec.probe_point(), "security_sb_pivotroot");
        assert_eq!(rec.cgroup_path(), "/docker/abc");
        assert_eq!(rec.exec_name(), "runc:[2:INIT]");
        assert_eq!(rec.exec_path(), "-");
        assert_eq!(rec.exec_path_opt(), None);
        assert_eq!(rec.resource_path(), "/var/lib/docker/overlay2/x/merged");
        assert_eq!(rec.mntns_root(), "/var/lib/docker/overlay2/x/merged");
        assert_eq!(rec.render_line(), PIVOT);
    }

    #[test]
    fn five_fields_is_malformed() {
        let err = parse_trace_line("a\t/b\tc\t/d\t/e").unwrap_err();
        assert!(matches!(err, TraceError::MalformedLine { .. }), "{err:?}");
    }

    #[test]
    fn seven_fields_is_malformed() {
        let err = parse_trace_line("a\t/b\tc\t/d\t/e\t/f\t/g").unwrap_err();
        assert!(matches!(err, TraceError::MalformedLine { .. }));
    }

    #[test]
    fn relative_path_is_invalid() {
        let err = parse_trace_line("p\t/docker/x\tsh\tbin/sh\t/etc\t/").unwrap_err();
        assert_eq!(
            err,
            TraceError::InvalidPath {
                field: "exec_path",
                value: "bin/sh".into()
            }
        );
    }

    #[test]
    fn both_exec_fields_missing() {
        assert!(parse_trace_line("p\t/docker/x\t-\t-\t/etc\t/").is_err());
    }

    #[test]
    fn probe_with_space_rejected() {
        assert!(parse_trace_line("p q\t/docker/x\tsh\t/bin/sh\t/etc\t/").is_err());
    }

    #[test]
    fn empty_field_rejected() {
        assert!(parse_trace_line("p\t\tsh\t/bin/sh\t/etc\t/").is_err());
    }

    #[test]
    fn trailing_newline_tolerated() {
        let rec = parse_trace_line(&format!("{PIVOT}\r\n")).unwrap();
        assert_eq!(rec.render_line(), PIVOT);
    }

    fn path_or_dash() -> impl Strategy<Value = String> {
        prop_oneof![
            1 => Just("-".to_string()),
            4 => "(/[a-zA-Z0-9_.:\\[\\] -]{1,8}){1,4}",
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn render_parse_round_trip(
            probe in "[a-z_.:]{1,24}",
            cgroup in path_or_dash(),
            name in "[a-zA-Z0-9_:\\[\\]-]{1,12}",
            exec in path_or_dash(),
            res in path_or_dash(),
            root in path_or_dash(),
        ) {
            prop_assume!(!(name == "-" && exec == "-"));
            let line = format!("{probe}\t{cgroup}\t{name}\t{exec}\t{res}\t{root}");
            let rec = parse_trace_line(&line).unwrap();
            prop_assert_eq!(render_trace_line(&rec), line);
        }
    }
}
