//! Structured pass/fail reports with deterministic text and dump renderings.
//!
//! Mathematical failures (nonzero residuals) are report content, not errors;
//! the CLI maps an overall failed report to exit code 1.

use std::fmt;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Status {
    Pass,
    Fail,
}

#[derive(Clone, Debug)]
pub struct Item {
    pub label: String,
    pub status: Status,
    /// Key/value details in insertion order (residuals, matched conventions, ...).
    pub details: Vec<(String, String)>,
}

#[derive(Clone, Debug, Default)]
pub struct Report {
    pub title: String,
    pub items: Vec<Item>,
    pub notes: Vec<String>,
}

impl Report {
    pub fn new(title: impl Into<String>) -> Report {
        Report {
            title: title.into(),
            items: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn check(&mut self, label: impl Into<String>, ok: bool) -> &mut Self {
        self.items.push(Item {
            label: label.into(),
            status: if ok { Status::Pass } else { Status::Fail },
            details: Vec::new(),
        });
        self
    }

    pub fn check_with(
        &mut self,
        label: impl Into<String>,
        ok: bool,
        details: Vec<(String, String)>,
    ) -> &mut Self {
        self.items.push(Item {
            label: label.into(),
            status: if ok { Status::Pass } else { Status::Fail },
            details,
        });
        self
    }

    pub fn fail(&mut self, label: impl Into<String>, residual: impl Into<String>) -> &mut Self {
        self.check_with(label, false, vec![("residual".into(), residual.into())])
    }

    pub fn note(&mut self, s: impl Into<String>) -> &mut Self {
        self.notes.push(s.into());
        self
    }

    pub fn merge(&mut self, other: Report) -> &mut Self {
        for mut item in other.items {
            item.label = format!("{}: {}", other.title, item.label);
            self.items.push(item);
        }
        for n in other.notes {
            self.notes.push(format!("{}: {}", other.title, n));
        }
        self
    }

    pub fn passed(&self) -> bool {
        self.items.iter().all(|i| i.status == Status::Pass)
    }

    pub fn render_text(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("== {} ==\n", self.title));
        for i in &self.items {
            let tag = match i.status {
                Status::Pass => "PASS",
                Status::Fail => "FAIL",
            };
            s.push_str(&format!("[{tag}] {}\n", i.label));
            for (k, v) in &i.details {
                s.push_str(&format!("       {k}: {v}\n"));
            }
        }
        for n in &self.notes {
            s.push_str(&format!("note: {n}\n"));
        }
        s.push_str(&format!(
            "result: {}\n",
            if self.passed() { "pass" } else { "FAIL" }
        ));
        s
    }

    /// Machine-readable dump with stable key order.
    pub fn render_dump(&self) -> String {
        let mut s = String::new();
        s.push_str("{\"title\":");
        json_str(&mut s, &self.title);
        s.push_str(",\"passed\":");
        s.push_str(if self.passed() { "true" } else { "false" });
        s.push_str(",\"items\":[");
        for (k, i) in self.items.iter().enumerate() {
            if k > 0 {
                s.push(',');
            }
            s.push_str("{\"label\":");
            json_str(&mut s, &i.label);
            s.push_str(",\"status\":");
            json_str(&mut s, if i.status == Status::Pass { "pass" } else { "fail" });
            s.push_str(",\"details\":{");
            for (j, (dk, dv)) in i.details.iter().enumerate() {
                if j > 0 {
                    s.push(',');
                }
                json_str(&mut s, dk);
                s.push(':');
                json_str(&mut s, dv);
            }
            s.push_str("}}");
        }
        s.push_str("],\"notes\":[");
        for (k, n) in self.notes.iter().enumerate() {
            if k > 0 {
                s.push(',');
            }
            json_str(&mut s, n);
        }
        s.push_str("]}");
        s
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.render_text())
    }
}

fn json_str(out: &mut String, s: &str) {
    out.push('"');
    for ch in s.chars() {
        match ch {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            c if (c as u32) < 0x20 => out.push_str(&format!("\\u{:04x}", c as u32)),
            c => out.push(c),
        }
    }
    out.push('"');
}
