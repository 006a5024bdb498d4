//! Long-format `section,name,index,value` reports.
//!
//! Floats are written with Rust's shortest round-trip formatting, so parsing
//! a report back recovers every value bit for bit.

use icse_core::Vector;

pub const HEADER: &str = "section,name,index,value";

pub fn comment_line(seed: u64) -> String {
    icse_core::mc_study::comment_header(seed)
}

pub struct Report {
    writer: csv::Writer<Vec<u8>>,
    trailer: Vec<String>,
}

impl Report {
    pub fn new(seed: u64) -> Self {
        let mut buf = comment_line(seed).into_bytes();
        buf.push(b'\n');
        let mut writer = csv::Writer::from_writer(buf);
        writer.write_record(HEADER.split(',')).expect("in-memory write");
        Report { writer, trailer: Vec::new() }
    }

    pub fn value(&mut self, section: &str, name: &str, index: &str, value: f64) {
        self.writer
            .write_record([section, name, index, &value.to_string()])
            .expect("in-memory write");
    }

    pub fn scalar(&mut self, section: &str, name: &str, value: f64) {
        self.value(section, name, "", value);
    }

    /// One row per entry, indexed from 1.
    pub fn vector(&mut self, section: &str, name: &str, v: &Vector) {
        for (i, x) in v.iter().enumerate() {
            self.value(section, name, &(i + 1).to_string(), *x);
        }
    }

    /// Comment line appended after the table.
    pub fn note(&mut self, text: impl Into<String>) {
        self.trailer.push(text.into());
    }

    pub fn finish(self) -> Vec<u8> {
        let mut out = self.writer.into_inner().expect("in-memory flush");
        for t in self.trailer {
            out.extend_from_slice(format!("# {t}\n").as_bytes());
        }
        out
    }
}
