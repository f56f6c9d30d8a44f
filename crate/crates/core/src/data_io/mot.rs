//! MOTChallenge text format:
//! `frame,id,bb_left,bb_top,bb_width,bb_height,conf[,x,y,z]`.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use super::{canonical_cmp, Detection, BIRD_CLASS};
use crate::error::{Error, Result};
use crate::geometry::BoundingBox;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Column7 {
    Confidence,
    ConsiderFlag,
}

/// Parses a prediction / raw-detection file. `id = -1` maps to no track id.
pub fn parse_mot<R: BufRead>(reader: R) -> Result<Vec<Detection>> {
    parse(reader, Column7::Confidence)
}

/// Parses a ground-truth file, where the 7th column is a consider flag:
/// rows with flag 0 are dropped, the rest get confidence 1.
pub fn parse_mot_gt<R: BufRead>(reader: R) -> Result<Vec<Detection>> {
    parse(reader, Column7::ConsiderFlag)
}

fn parse<R: BufRead>(reader: R, col7: Column7) -> Result<Vec<Detection>> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        if let Some(det) = parse_line(text, idx + 1, col7)? {
            out.push(det);
        }
    }
    Ok(out)
}

fn parse_line(text: &str, line: usize, col7: Column7) -> Result<Option<Detection>> {
    let fail = |reason: &str| Error::Parse {
        line,
        text: text.to_string(),
        reason: reason.to_string(),
    };
    let fields: Vec<&str> = text.split(',').map(str::trim).collect();
    if fields.len() < 7 {
        return Err(fail("expected at least 7 comma-separated fields"));
    }
    let mut nums = [0.0f64; 7];
    for (slot, field) in nums.iter_mut().zip(&fields) {
        *slot = field.parse().map_err(|_| fail("malformed number"))?;
        if !slot.is_finite() {
            return Err(fail("non-finite number"));
        }
    }
    for field in &fields[7..] {
        field.parse::<f64>().map_err(|_| fail("malformed number"))?;
    }
    let [frame, id, left, top, width, height, c7] = nums;

    if frame.fract() != 0.0 || frame < 1.0 {
        return Err(fail("frame must be an integer >= 1"));
    }
    if id.fract() != 0.0 || (id < 1.0 && id != -1.0) || id > u32::MAX as f64 {
        return Err(fail("track id must be -1 or an integer >= 1"));
    }
    if width <= 0.0 || height <= 0.0 {
        return Err(fail("non-positive box dimension"));
    }
    let confidence = match col7 {
        Column7::ConsiderFlag if c7 == 0.0 => return Ok(None),
        Column7::ConsiderFlag => 1.0,
        Column7::Confidence => {
            if !(0.0..=1.0).contains(&c7) {
                return Err(fail("confidence outside [0, 1]"));
            }
            c7
        }
    };
    let bbox = BoundingBox::new(left, top, width, height).map_err(|e| fail(&e.to_string()))?;
    Ok(Some(Detection {
        frame: frame as usize - 1,
        bbox,
        confidence,
        track_id: (id > 0.0).then_some(id as u32),
        class_id: BIRD_CLASS,
    }))
}

/// Writes detections sorted by `(frame, track_id)`, fixed precision.
pub fn write_mot<W: Write>(detections: &[Detection], mut w: W) -> Result<()> {
    let mut sorted = detections.to_vec();
    sorted.sort_by(canonical_cmp);
    for d in &sorted {
        writeln!(
            w,
            "{},{},{:.3},{:.3},{:.3},{:.3},{:.4},-1,-1,-1",
            d.frame + 1,
            d.track_id.map_or(-1, i64::from),
            d.bbox.left(),
            d.bbox.top(),
            d.bbox.width(),
            d.bbox.height(),
            d.confidence
        )?;
    }
    Ok(())
}

/// One sequence read from a directory of MOT files.
#[derive(Debug, Clone)]
pub struct MotSequenceFile {
    pub detections: Vec<Detection>,
    /// From `seqinfo.ini` when present.
    pub frame_count: Option<usize>,
}

/// Reads every sequence in `dir`.
///
/// Accepts flat `<name>.txt` files and MOTChallenge-style
/// `<name>/gt/gt.txt` (with optional `<name>/seqinfo.ini`). With `gt = true`
/// the 7th column is read as the consider flag.
pub fn read_mot_dir(dir: &Path, gt: bool) -> Result<BTreeMap<String, MotSequenceFile>> {
    let mut out = BTreeMap::new();
    let entries = fs::read_dir(dir).map_err(|e| Error::from(e).in_file(dir))?;
    let mut paths: Vec<_> = entries.filter_map(|e| e.ok().map(|e| e.path())).collect();
    paths.sort();
    for path in paths {
        let (name, file, seqinfo) = if path.is_dir() {
            let file = path.join("gt").join("gt.txt");
            if !file.is_file() {
                continue;
            }
            let name = path.file_name().unwrap_or_default().to_string_lossy().into_owned();
            (name, file, Some(path.join("seqinfo.ini")))
        } else if path.extension().is_some_and(|e| e == "txt") {
            let name = path.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            (name, path, None)
        } else {
            continue;
        };
        let reader = BufReader::new(fs::File::open(&file).map_err(|e| Error::from(e).in_file(&file))?);
        let detections = if gt { parse_mot_gt(reader) } else { parse_mot(reader) }.map_err(|e| e.in_file(&file))?;
        let frame_count = match seqinfo {
            Some(ini) if ini.is_file() => read_seq_length(&ini)?,
            _ => None,
        };
        out.insert(
            name,
            MotSequenceFile {
                detections,
                frame_count,
            },
        );
    }
    Ok(out)
}

fn read_seq_length(ini: &Path) -> Result<Option<usize>> {
    let text = fs::read_to_string(ini).map_err(|e| Error::from(e).in_file(ini))?;
    for (i, line) in text.lines().enumerate() {
        if let Some((key, value)) = line.split_once('=') {
            if key.trim().eq_ignore_ascii_case("seqLength") {
                let n = value.trim().parse::<usize>().map_err(|_| {
                    Error::Parse {
                        line: i + 1,
                        text: line.to_string(),
                        reason: "malformed seqLength".into(),
                    }
                    .in_file(ini)
                })?;
                return Ok(Some(n));
            }
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_tracked_line() {
        let d = parse_mot("1,1,10,20,16,16,1,-1,-1,-1\n".as_bytes()).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].frame, 0);
        assert_eq!(d[0].track_id, Some(1));
        assert_eq!(d[0].bbox, BoundingBox::new(10., 20., 16., 16.).unwrap());
        assert_eq!(d[0].confidence, 1.0);
    }

    #[test]
    fn parses_raw_detection() {
        let d = parse_mot("3,-1,0,0,8,8,0.9".as_bytes()).unwrap();
        assert_eq!(d[0].frame, 2);
        assert_eq!(d[0].track_id, None);
        assert_eq!(d[0].confidence, 0.9);
    }

    #[test]
    fn rejects_bad_lines() {
        let err = parse_mot("1,1,10,20,0,16,1".as_bytes()).unwrap_err();
        assert!(
            err.to_string().starts_with("non-positive box dimension at line 1"),
            "{err}"
        );
        let err = parse_mot("1,1,1,1,4,4,1\n\n1,1,x,1,4,4,1\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
        assert!(parse_mot("0,1,1,1,4,4,1".as_bytes()).is_err());
        assert!(parse_mot("1,0,1,1,4,4,1".as_bytes()).is_err());
        assert!(parse_mot("1,1,1,1,4,4".as_bytes()).is_err());
        assert!(parse_mot("1,1,1,1,4,4,1.5".as_bytes()).is_err());
    }

    #[test]
    fn crlf_and_blank_lines() {
        let d = parse_mot("1,1,0,0,4,4,1\r\n\r\n2,1,0,0,4,4,1\r\n".as_bytes()).unwrap();
        assert_eq!(d.len(), 2);
    }

    #[test]
    fn gt_consider_flag() {
        let d = parse_mot_gt("1,1,0,0,4,4,1,1,1\n1,2,0,0,4,4,0,1,1\n".as_bytes()).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].track_id, Some(1));
    }

    #[test]
    fn write_sorts_and_formats() {
        let b = BoundingBox::new(1.0, 2.0, 3.0, 4.0).unwrap();
        let dets = vec![Detection::tracked(4, 2, b), Detection::tracked(1, 7, b)];
        let mut buf = Vec::new();
        write_mot(&dets, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "2,7,1.000,2.000,3.000,4.000,1.0000,-1,-1,-1\n5,2,1.000,2.000,3.000,4.000,1.0000,-1,-1,-1\n"
        );
        let mut empty = Vec::new();
        write_mot(&[], &mut empty).unwrap();
        assert!(empty.is_empty());
    }

    fn arb_det() -> impl Strategy<Value = Detection> {
        (
            0usize..500,
            prop::option::of(1u32..1000),
            -1000.0..1000.0f64,
            -1000.0..1000.0f64,
            0.01..300.0f64,
            0.01..300.0f64,
            0.0..=1.0f64,
        )
            .prop_map(|(frame, id, l, t, w, h, c)| Detection {
                frame,
                bbox: BoundingBox::new(l, t, w, h).unwrap(),
                confidence: c,
                track_id: id,
                class_id: BIRD_CLASS,
            })
    }

    proptest! {
        #[test]
        fn write_parse_round_trip(dets in prop::collection::vec(arb_det(), 0..40)) {
            let mut buf = Vec::new();
            write_mot(&dets, &mut buf).unwrap();
            let back = parse_mot(buf.as_slice()).unwrap();
            let mut sorted = dets.clone();
            sorted.sort_by(canonical_cmp);
            prop_assert_eq!(back.len(), sorted.len());
            for (a, b) in sorted.iter().zip(&back) {
                prop_assert_eq!(a.frame, b.frame);
                prop_assert_eq!(a.track_id, b.track_id);
                prop_assert!((a.bbox.left() - b.bbox.left()).abs() <= 5e-4 + 1e-9);
                prop_assert!((a.bbox.top() - b.bbox.top()).abs() <= 5e-4 + 1e-9);
                prop_assert!((a.bbox.width() - b.bbox.width()).abs() <= 5e-4 + 1e-9);
                prop_assert!((a.bbox.height() - b.bbox.height()).abs() <= 5e-4 + 1e-9);
                prop_assert!((a.confidence - b.confidence).abs() <= 5e-5 + 1e-9);
            }
        }
    }
}
