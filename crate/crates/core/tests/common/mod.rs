#![allow(dead_code)]

use std::path::Path;

use geofact_core::config::Config;
use geofact_core::gateway::{ClaimPlan, MockSettings};
use geofact_core::LanguageCode;

pub const GRID_TOPICS: [&str; 4] = ["japan", "kenya", "brazil", "germany"];
pub const GRID_LANGUAGES: [LanguageCode; 3] = [LanguageCode::En, LanguageCode::Ko, LanguageCode::Sw];

/// (topic, true claims, false claims) seeded into the mock generator.
pub const GRID_PLANS: [(&str, usize, usize); 4] =
    [("japan", 3, 2), ("kenya", 5, 0), ("brazil", 1, 3), ("germany", 2, 2)];

/// All-mock configuration over synthetic knowledge, with caches under `dir`.
pub fn mock_config(dir: &Path) -> Config {
    let mut config = Config::mock();
    config.paths.article_cache = dir.join("articles");
    config.paths.response_cache = dir.join("responses");
    config.paths.runs_dir = dir.join("runs");
    config.run.topics = GRID_TOPICS.iter().map(|s| s.to_string()).collect();
    config.run.languages = GRID_LANGUAGES.to_vec();
    config.run.seed = 7;
    let plans = GRID_PLANS
        .iter()
        .map(|(topic, t, f)| ClaimPlan {
            topic_id: topic.to_string(),
            language: None,
            true_claims: *t,
            false_claims: *f,
            refuse: false,
        })
        .collect();
    config.backends.generation.mock = Some(MockSettings {
        plans,
        ..MockSettings::default()
    });
    config
}

pub fn read(dir: &Path, file: &str) -> String {
    std::fs::read_to_string(dir.join(file)).unwrap_or_else(|e| panic!("{}: {e}", dir.join(file).display()))
}

/// Drops `created_at` from every JSON line.
pub fn without_timestamps(jsonl: &str) -> String {
    jsonl
        .lines()
        .map(|l| {
            let mut v: serde_json::Value = serde_json::from_str(l).unwrap();
            if let Some(o) = v.as_object_mut() {
                o.remove("created_at");
            }
            v.to_string()
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// One request received by [`serve`].
#[derive(Debug, Clone)]
pub struct Recorded {
    pub method: String,
    pub target: String,
    pub headers: Vec<(String, String)>,
    pub body: String,
}

impl Recorded {
    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.as_str())
    }
}

/// Local HTTP/1.1 server answering every request with `reply(request, n)`,
/// where `n` counts requests from zero. Returns the base URL and the log.
pub fn serve<F>(reply: F) -> (String, std::sync::Arc<std::sync::Mutex<Vec<Recorded>>>)
where
    F: Fn(&Recorded, usize) -> (u16, String) + Send + 'static,
{
    use std::io::{BufRead, BufReader, Read, Write};
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    let log = std::sync::Arc::new(std::sync::Mutex::new(Vec::new()));
    let seen = log.clone();
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut first = String::new();
            if reader.read_line(&mut first).unwrap_or(0) == 0 {
                continue;
            }
            let mut parts = first.split_whitespace();
            let method = parts.next().unwrap_or("").to_string();
            let target = parts.next().unwrap_or("").to_string();
            let mut headers = Vec::new();
            loop {
                let mut line = String::new();
                if reader.read_line(&mut line).unwrap_or(0) == 0 || line == "\r\n" {
                    break;
                }
                if let Some((k, v)) = line.trim_end().split_once(':') {
                    headers.push((k.trim().to_string(), v.trim().to_string()));
                }
            }
            let len = headers
                .iter()
                .find(|(k, _)| k.eq_ignore_ascii_case("content-length"))
                .and_then(|(_, v)| v.parse().ok())
                .unwrap_or(0);
            let mut body = vec![0; len];
            reader.read_exact(&mut body).unwrap();
            let request = Recorded {
                method,
                target,
                headers,
                body: String::from_utf8_lossy(&body).into_owned(),
            };
            let n = seen.lock().unwrap().len();
            let (status, payload) = reply(&request, n);
            seen.lock().unwrap().push(request);
            let _ = write!(
                stream,
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{payload}",
                payload.len()
            );
        }
    });
    (url, log)
}
