//! Reading and writing session directories.
//!
//! Numbers are written with Rust's shortest round-trip float formatting,
//! so a write/read cycle reproduces every sample bit for bit at the
//! default precision.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use super::{
    BaselineInterval, BaselineLabel, ChannelKind, ChannelRecording, E4Error, Session,
};
use crate::scalar::Real;

const SINGLE_COLUMN_FILES: [(&str, ChannelKind); 4] = [
    ("BVP.csv", ChannelKind::Bvp),
    ("EDA.csv", ChannelKind::Eda),
    ("TEMP.csv", ChannelKind::Temp),
    ("HR.csv", ChannelKind::Hr),
];

/// Read one session directory.
///
/// Subject and week come from the directory naming convention
/// `<subject>/week_<n>`; a directory outside that convention becomes
/// subject `<dirname>`, week 1. `tags.csv` must exist (it may be empty);
/// `baseline.csv` is optional.
pub fn read_session<T: Real>(dir: &Path) -> Result<Session<T>, E4Error> {
    let (subject_id, week_index) = subject_and_week(dir);

    let mut channels = BTreeMap::new();
    for (file, kind) in SINGLE_COLUMN_FILES {
        let rec = read_single_column(&dir.join(file), kind)?;
        channels.insert(kind, rec);
    }
    for rec in read_acc(&dir.join("ACC.csv"))? {
        channels.insert(rec.kind, rec);
    }

    let tags = read_tags(&dir.join("tags.csv"))?;
    let baseline_path = dir.join("baseline.csv");
    let baseline_intervals = if baseline_path.exists() {
        Some(read_baseline(&baseline_path)?)
    } else {
        None
    };

    let session = Session {
        subject_id,
        week_index,
        channels,
        tags,
        baseline_intervals,
    };
    session.validate()?;
    Ok(session)
}

/// Write a session in the E4 directory layout, creating `dir`.
pub fn write_session<T: Real>(session: &Session<T>, dir: &Path) -> Result<(), E4Error> {
    session.validate()?;
    fs::create_dir_all(dir).map_err(|source| E4Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;

    for (file, kind) in SINGLE_COLUMN_FILES {
        let rec = &session.channels[&kind];
        let path = dir.join(file);
        let mut out = String::new();
        out.push_str(&format!("{}\n{}\n", rec.start_time, rec.sample_rate_hz));
        for v in &rec.samples {
            out.push_str(&format!("{v}\n"));
        }
        write_file(&path, out.as_bytes())?;
    }

    let (x, y, z) = (
        &session.channels[&ChannelKind::AccX],
        &session.channels[&ChannelKind::AccY],
        &session.channels[&ChannelKind::AccZ],
    );
    let n = x.samples.len().min(y.samples.len()).min(z.samples.len());
    let mut out = String::new();
    out.push_str(&format!(
        "{t},{t},{t}\n{r},{r},{r}\n",
        t = x.start_time,
        r = x.sample_rate_hz
    ));
    for i in 0..n {
        out.push_str(&format!(
            "{},{},{}\n",
            x.samples[i], y.samples[i], z.samples[i]
        ));
    }
    write_file(&dir.join("ACC.csv"), out.as_bytes())?;

    let mut out = String::new();
    for tag in &session.tags {
        out.push_str(&format!("{tag}\n"));
    }
    write_file(&dir.join("tags.csv"), out.as_bytes())?;

    if let Some(intervals) = &session.baseline_intervals {
        let mut out = String::new();
        for iv in intervals {
            out.push_str(&format!("{},{},{}\n", iv.start, iv.end, iv.label));
        }
        write_file(&dir.join("baseline.csv"), out.as_bytes())?;
    }
    Ok(())
}

fn subject_and_week(dir: &Path) -> (String, u32) {
    let name = |p: &Path| {
        p.file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    };
    let last = name(dir);
    if let Some(rest) = last.strip_prefix("week_") {
        if let Ok(week) = rest.parse::<u32>() {
            if week >= 1 {
                if let Some(parent) = dir.parent() {
                    let subject = name(parent);
                    if !subject.is_empty() {
                        return (subject, week);
                    }
                }
            }
        }
    }
    (if last.is_empty() { "session".into() } else { last }, 1)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), E4Error> {
    let io_err = |source| E4Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut f = fs::File::create(path).map_err(io_err)?;
    f.write_all(bytes).map_err(io_err)
}

fn read_lines(path: &Path) -> Result<Vec<String>, E4Error> {
    if !path.exists() {
        return Err(E4Error::MissingFile {
            path: path.to_path_buf(),
        });
    }
    let text = fs::read_to_string(path).map_err(|source| E4Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(text.lines().map(|l| l.trim().to_string()).collect())
}

fn parse_f64(path: &Path, line: usize, text: &str) -> Result<f64, E4Error> {
    text.parse::<f64>().map_err(|_| E4Error::MalformedNumber {
        path: path.to_path_buf(),
        line,
        text: text.to_string(),
    })
}

fn parse_value<T: Real>(path: &Path, line: usize, text: &str) -> Result<T, E4Error> {
    text.parse::<T>().map_err(|_| E4Error::MalformedNumber {
        path: path.to_path_buf(),
        line,
        text: text.to_string(),
    })
}

/// Header lines may repeat the value across columns (ACC) or carry one
/// value; all columns must agree.
fn parse_header(path: &Path, line: usize, text: &str) -> Result<f64, E4Error> {
    let fields: Vec<&str> = text.split(',').map(str::trim).collect();
    let first = parse_f64(path, line, fields[0])?;
    for f in &fields[1..] {
        if parse_f64(path, line, f)? != first {
            return Err(E4Error::HeaderDisagrees {
                path: path.to_path_buf(),
                line,
            });
        }
    }
    Ok(first)
}

fn read_single_column<T: Real>(
    path: &Path,
    kind: ChannelKind,
) -> Result<ChannelRecording<T>, E4Error> {
    let lines = read_lines(path)?;
    let mut it = lines.iter().enumerate().filter(|(_, l)| !l.is_empty());
    let start = it
        .next()
        .ok_or_else(|| E4Error::TruncatedHeader {
            path: path.to_path_buf(),
            what: "start time",
        })
        .and_then(|(i, l)| parse_header(path, i + 1, l))?;
    let rate = it
        .next()
        .ok_or_else(|| E4Error::TruncatedHeader {
            path: path.to_path_buf(),
            what: "sample rate",
        })
        .and_then(|(i, l)| parse_header(path, i + 1, l))?;

    let mut samples = Vec::new();
    for (i, l) in it {
        samples.push(parse_value(path, i + 1, l)?);
    }
    Ok(ChannelRecording {
        kind,
        start_time: start,
        sample_rate_hz: rate,
        samples,
    })
}

fn read_acc<T: Real>(path: &Path) -> Result<[ChannelRecording<T>; 3], E4Error> {
    let lines = read_lines(path)?;
    let mut it = lines.iter().enumerate().filter(|(_, l)| !l.is_empty());
    let start = it
        .next()
        .ok_or_else(|| E4Error::TruncatedHeader {
            path: path.to_path_buf(),
            what: "start time",
        })
        .and_then(|(i, l)| parse_header(path, i + 1, l))?;
    let rate = it
        .next()
        .ok_or_else(|| E4Error::TruncatedHeader {
            path: path.to_path_buf(),
            what: "sample rate",
        })
        .and_then(|(i, l)| parse_header(path, i + 1, l))?;

    let mut axes: [Vec<T>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for (i, l) in it {
        let fields: Vec<&str> = l.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(E4Error::ColumnCount {
                path: path.to_path_buf(),
                line: i + 1,
                expected: 3,
                found: fields.len(),
            });
        }
        for (axis, field) in axes.iter_mut().zip(fields) {
            axis.push(parse_value(path, i + 1, field)?);
        }
    }
    let [x, y, z] = axes;
    let make = |kind, samples| ChannelRecording {
        kind,
        start_time: start,
        sample_rate_hz: rate,
        samples,
    };
    Ok([
        make(ChannelKind::AccX, x),
        make(ChannelKind::AccY, y),
        make(ChannelKind::AccZ, z),
    ])
}

fn read_tags(path: &Path) -> Result<Vec<f64>, E4Error> {
    let lines = read_lines(path)?;
    let mut tags = Vec::new();
    for (i, l) in lines.iter().enumerate() {
        if l.is_empty() {
            continue;
        }
        tags.push(parse_f64(path, i + 1, l)?);
    }
    Ok(tags)
}

fn read_baseline(path: &Path) -> Result<Vec<BaselineInterval>, E4Error> {
    let lines = read_lines(path)?;
    let mut intervals = Vec::new();
    for (i, l) in lines.iter().enumerate() {
        if l.is_empty() {
            continue;
        }
        let fields: Vec<&str> = l.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(E4Error::ColumnCount {
                path: path.to_path_buf(),
                line: i + 1,
                expected: 3,
                found: fields.len(),
            });
        }
        let start = parse_f64(path, i + 1, fields[0])?;
        let end = parse_f64(path, i + 1, fields[1])?;
        let label = match fields[2] {
            "dance" => BaselineLabel::Dance,
            "relax" => BaselineLabel::Relax,
            other => {
                return Err(E4Error::UnknownBaselineLabel {
                    path: path.to_path_buf(),
                    line: i + 1,
                    text: other.to_string(),
                })
            }
        };
        intervals.push(BaselineInterval { start, end, label });
    }
    Ok(intervals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::e4::{generate_session, SyntheticConfig};

    fn sample_session() -> Session<f64> {
        let cfg = SyntheticConfig {
            n_subjects: 3,
            weeks_per_subject: 2,
            session_duration_s: 1800.0,
            ..SyntheticConfig::default()
        };
        generate_session(&cfg, 2, 2).unwrap()
    }

    #[test]
    fn write_read_roundtrip_is_bit_exact() {
        let session = sample_session();
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().join(&session.subject_id).join("week_2");
        write_session(&session, &dir).unwrap();
        let back: Session<f64> = read_session(&dir).unwrap();
        assert_eq!(back, session);
    }

    #[test]
    fn week_one_roundtrip_keeps_baseline_intervals() {
        let cfg = SyntheticConfig {
            session_duration_s: 1800.0,
            ..SyntheticConfig::default()
        };
        let session: Session<f64> = generate_session(&cfg, 0, 1).unwrap();
        assert!(session.baseline_intervals.is_some());
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().join("s01").join("week_1");
        write_session(&session, &dir).unwrap();
        let back: Session<f64> = read_session(&dir).unwrap();
        assert_eq!(back.baseline_intervals, session.baseline_intervals);
    }

    #[test]
    fn subject_and_week_come_from_the_path() {
        let session = sample_session();
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().join("s03").join("week_2");
        write_session(&session, &dir).unwrap();
        let back: Session<f64> = read_session(&dir).unwrap();
        assert_eq!(back.subject_id, "s03");
        assert_eq!(back.week_index, 2);

        // Outside the convention the directory name is the subject.
        let flat = tmp.path().join("patient-a");
        write_session(&session, &flat).unwrap();
        let back: Session<f64> = read_session(&flat).unwrap();
        assert_eq!(back.subject_id, "patient-a");
        assert_eq!(back.week_index, 1);
    }

    #[test]
    fn missing_channel_file_is_reported() {
        let session = sample_session();
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().join("s03").join("week_2");
        write_session(&session, &dir).unwrap();
        fs::remove_file(dir.join("EDA.csv")).unwrap();
        match read_session::<f64>(&dir) {
            Err(E4Error::MissingFile { path }) => {
                assert!(path.ends_with("EDA.csv"));
            }
            other => panic!("expected MissingFile, got {other:?}"),
        }
    }

    #[test]
    fn missing_tags_file_is_reported() {
        let session = sample_session();
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().join("s03").join("week_2");
        write_session(&session, &dir).unwrap();
        fs::remove_file(dir.join("tags.csv")).unwrap();
        assert!(matches!(
            read_session::<f64>(&dir),
            Err(E4Error::MissingFile { .. })
        ));
    }

    #[test]
    fn malformed_number_names_the_line() {
        let session = sample_session();
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().join("s03").join("week_2");
        write_session(&session, &dir).unwrap();
        let path = dir.join("HR.csv");
        let mut text = fs::read_to_string(&path).unwrap();
        text.push_str("not-a-number\n");
        fs::write(&path, text).unwrap();
        match read_session::<f64>(&dir) {
            Err(E4Error::MalformedNumber { line, text, .. }) => {
                assert_eq!(text, "not-a-number");
                assert!(line > 2);
            }
            other => panic!("expected MalformedNumber, got {other:?}"),
        }
    }

    #[test]
    fn acc_headers_accept_one_or_three_columns() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("ACC.csv");
        fs::write(&path, "1000\n32\n1,2,3\n4,5,6\n").unwrap();
        let [x, _, z] = read_acc::<f64>(&path).unwrap();
        assert_eq!(x.start_time, 1000.0);
        assert_eq!(x.samples, vec![1.0, 4.0]);
        assert_eq!(z.samples, vec![3.0, 6.0]);

        fs::write(&path, "1000,1000,1000\n32,32,32\n1,2,3\n").unwrap();
        let [x, y, _] = read_acc::<f64>(&path).unwrap();
        assert_eq!(x.sample_rate_hz, 32.0);
        assert_eq!(y.samples, vec![2.0]);
    }

    #[test]
    fn disagreeing_acc_header_is_rejected() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("ACC.csv");
        fs::write(&path, "1000,1001,1000\n32,32,32\n1,2,3\n").unwrap();
        assert!(matches!(
            read_acc::<f64>(&path),
            Err(E4Error::HeaderDisagrees { line: 1, .. })
        ));
    }

    #[test]
    fn short_acc_row_is_rejected() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("ACC.csv");
        fs::write(&path, "1000\n32\n1,2\n").unwrap();
        assert!(matches!(
            read_acc::<f64>(&path),
            Err(E4Error::ColumnCount {
                expected: 3,
                found: 2,
                ..
            })
        ));
    }

    #[test]
    fn absent_baseline_reads_as_none() {
        let session = sample_session();
        assert!(session.baseline_intervals.is_none());
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().join("s03").join("week_2");
        write_session(&session, &dir).unwrap();
        assert!(!dir.join("baseline.csv").exists());
        let back: Session<f64> = read_session(&dir).unwrap();
        assert!(back.baseline_intervals.is_none());
    }

    #[test]
    fn truncated_header_is_reported() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("HR.csv");
        fs::write(&path, "1000\n").unwrap();
        assert!(matches!(
            read_single_column::<f64>(&path, ChannelKind::Hr),
            Err(E4Error::TruncatedHeader {
                what: "sample rate",
                ..
            })
        ));
    }
}
