use std::collections::{HashMap, HashSet};
use std::path::Path;
use std::str::FromStr;

use nalgebra::Point2;

use super::{read_bytes, write_bytes, IoError};
use crate::curation::{Track, TrackPoint, TrackSet};
use crate::depthalign::{Match, MatchSet};

const TRACKS_HEADER: [&str; 5] = ["track_id", "frame", "x", "y", "visible"];
const MATCHES_HEADER: [&str; 6] = ["src_x", "src_y", "anchor_view", "dst_x", "dst_y", "src_depth"];

/// Reads every record after checking the header, yielding `(line, record)`.
fn records(bytes: &[u8], header: &[&str]) -> Result<Vec<(u64, csv::StringRecord)>, IoError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let found = rdr
        .headers()
        .map_err(|e| IoError::RowParse {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    if found.iter().ne(header.iter().copied()) {
        return Err(IoError::HeaderMismatch {
            expected: header.join(","),
            found: found.iter().collect::<Vec<_>>().join(","),
        });
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| IoError::RowParse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != header.len() {
            return Err(IoError::RowParse {
                line,
                message: format!("expected {} fields, found {}", header.len(), rec.len()),
            });
        }
        out.push((line, rec));
    }
    Ok(out)
}

fn field<T: FromStr>(rec: &csv::StringRecord, i: usize, name: &str, line: u64) -> Result<T, IoError> {
    rec[i].parse().map_err(|_| IoError::RowParse {
        line,
        message: format!("bad {name} `{}`", &rec[i]),
    })
}

/// Tracks grouped by id in order of first appearance, points sorted by frame.
pub fn decode_tracks_csv(bytes: &[u8]) -> Result<TrackSet, IoError> {
    let mut tracks: Vec<Track> = Vec::new();
    let mut index: HashMap<u64, usize> = HashMap::new();
    let mut seen: HashSet<(u64, u32)> = HashSet::new();
    for (line, rec) in records(bytes, &TRACKS_HEADER)? {
        let id: u64 = field(&rec, 0, "track_id", line)?;
        let frame: u32 = field(&rec, 1, "frame", line)?;
        let x: f64 = field(&rec, 2, "x", line)?;
        let y: f64 = field(&rec, 3, "y", line)?;
        let visible = match &rec[4] {
            "0" => false,
            "1" => true,
            other => {
                return Err(IoError::RowParse {
                    line,
                    message: format!("visible must be 0 or 1, found `{other}`"),
                })
            }
        };
        if !seen.insert((id, frame)) {
            return Err(IoError::RowParse {
                line,
                message: format!("duplicate entry for track {id} frame {frame}"),
            });
        }
        let i = *index.entry(id).or_insert_with(|| {
            tracks.push(Track {
                id,
                points: Vec::new(),
            });
            tracks.len() - 1
        });
        tracks[i].points.push(TrackPoint {
            frame,
            x,
            y,
            visible,
        });
    }
    for t in &mut tracks {
        t.points.sort_by_key(|p| p.frame);
    }
    Ok(TrackSet { tracks })
}

pub fn encode_tracks_csv(tracks: &TrackSet) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(TRACKS_HEADER).expect("in-memory write");
    for t in &tracks.tracks {
        for p in &t.points {
            w.write_record([
                t.id.to_string(),
                p.frame.to_string(),
                p.x.to_string(),
                p.y.to_string(),
                u8::from(p.visible).to_string(),
            ])
            .expect("in-memory write");
        }
    }
    w.into_inner().expect("in-memory flush")
}

pub fn decode_matches_csv(bytes: &[u8]) -> Result<MatchSet, IoError> {
    let mut matches = Vec::new();
    for (line, rec) in records(bytes, &MATCHES_HEADER)? {
        let src_depth: f64 = field(&rec, 5, "src_depth", line)?;
        if !(src_depth > 0.0 && src_depth.is_finite()) {
            return Err(IoError::RowParse {
                line,
                message: format!("src_depth must be positive, found {src_depth}"),
            });
        }
        matches.push(Match {
            src: Point2::new(field(&rec, 0, "src_x", line)?, field(&rec, 1, "src_y", line)?),
            anchor_view: field(&rec, 2, "anchor_view", line)?,
            dst: Point2::new(field(&rec, 3, "dst_x", line)?, field(&rec, 4, "dst_y", line)?),
            src_depth,
        });
    }
    Ok(MatchSet { matches })
}

pub fn encode_matches_csv(matches: &MatchSet) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(MATCHES_HEADER).expect("in-memory write");
    for m in &matches.matches {
        w.write_record([
            m.src.x.to_string(),
            m.src.y.to_string(),
            m.anchor_view.to_string(),
            m.dst.x.to_string(),
            m.dst.y.to_string(),
            m.src_depth.to_string(),
        ])
        .expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

pub fn read_tracks_csv(path: &Path) -> Result<TrackSet, IoError> {
    decode_tracks_csv(&read_bytes(path)?)
}

pub fn write_tracks_csv(path: &Path, tracks: &TrackSet) -> Result<(), IoError> {
    write_bytes(path, &encode_tracks_csv(tracks))
}

pub fn read_matches_csv(path: &Path) -> Result<MatchSet, IoError> {
    decode_matches_csv(&read_bytes(path)?)
}

pub fn write_matches_csv(path: &Path, matches: &MatchSet) -> Result<(), IoError> {
    write_bytes(path, &encode_matches_csv(matches))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_row_track() {
        let text = b"track_id,frame,x,y,visible\n7,2,1.5,2,1\n7,0,1,2,1\n7,1,1.25,2,0\n";
        let ts = decode_tracks_csv(text).unwrap();
        assert_eq!(ts.tracks.len(), 1);
        let frames: Vec<u32> = ts.tracks[0].points.iter().map(|p| p.frame).collect();
        assert_eq!(frames, [0, 1, 2]);
        assert!(!ts.tracks[0].points[1].visible);
        assert_eq!(decode_tracks_csv(&encode_tracks_csv(&ts)).unwrap(), ts);
    }

    #[test]
    fn row_errors_carry_line_numbers() {
        let bad_x = b"track_id,frame,x,y,visible\n1,0,abc,2,1\n";
        assert!(matches!(
            decode_tracks_csv(bad_x),
            Err(IoError::RowParse { line: 2, .. })
        ));
        let dup = b"track_id,frame,x,y,visible\n1,0,1,2,1\n2,0,1,2,1\n1,0,3,3,1\n";
        assert!(matches!(
            decode_tracks_csv(dup),
            Err(IoError::RowParse { line: 4, .. })
        ));
        let vis = b"track_id,frame,x,y,visible\n1,0,1,2,yes\n";
        assert!(matches!(
            decode_tracks_csv(vis),
            Err(IoError::RowParse { line: 2, .. })
        ));
    }

    #[test]
    fn header_mismatch() {
        assert!(matches!(
            decode_tracks_csv(b"id,frame,x,y,visible\n"),
            Err(IoError::HeaderMismatch { .. })
        ));
        assert!(matches!(
            decode_matches_csv(b"src_x,src_y,dst_x,dst_y\n"),
            Err(IoError::HeaderMismatch { .. })
        ));
    }

    #[test]
    fn matches_round_trip() {
        let set = MatchSet {
            matches: vec![
                Match {
                    src: Point2::new(1.0, 2.5),
                    anchor_view: 3,
                    dst: Point2::new(0.1 + 0.2, -4.0),
                    src_depth: 2.0 / 3.0,
                },
                Match {
                    src: Point2::new(1.0, 2.5),
                    anchor_view: 0,
                    dst: Point2::new(9.0, 1e-7),
                    src_depth: 2.0 / 3.0,
                },
            ],
        };
        assert_eq!(decode_matches_csv(&encode_matches_csv(&set)).unwrap(), set);
        let neg = b"src_x,src_y,anchor_view,dst_x,dst_y,src_depth\n1,1,0,1,1,-2\n";
        assert!(matches!(
            decode_matches_csv(neg),
            Err(IoError::RowParse { line: 2, .. })
        ));
    }
}
