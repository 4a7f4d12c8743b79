//! Test support shared by the integration suites: a local HTTP stub server
//! and oracles that are independent of the library's implementations.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Instant;

use num_bigint::BigInt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

pub fn fixture_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("testdata/biosses_fixture.tsv")
}

// ---------------------------------------------------------------------------
// Stub server
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct Recorded {
    pub at: Instant,
    pub method: String,
    pub path: String,
    pub headers: BTreeMap<String, String>,
    pub body: Vec<u8>,
}

impl Recorded {
    pub fn json(&self) -> Value {
        serde_json::from_slice(&self.body).expect("request body is JSON")
    }
}

pub type Responder = dyn Fn(usize, &Recorded) -> (u16, String) + Send + Sync;

pub struct StubServer {
    pub url: String,
    log: Arc<Mutex<Vec<Recorded>>>,
}

impl StubServer {
    /// Serves `respond(request_index, request)` for every request.
    pub fn start(respond: impl Fn(usize, &Recorded) -> (u16, String) + Send + Sync + 'static) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let log = Arc::new(Mutex::new(Vec::new()));
        let respond: Arc<Responder> = Arc::new(respond);
        let log2 = log.clone();
        thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(stream) = stream else { continue };
                let (log, respond) = (log2.clone(), respond.clone());
                thread::spawn(move || serve(stream, log, respond));
            }
        });
        StubServer {
            url: format!("http://{addr}/v1"),
            log,
        }
    }

    /// Always answers with a completion whose content is `content`.
    pub fn canned(content: &str) -> Self {
        let body = completion(content);
        Self::start(move |_, _| (200, body.clone()))
    }

    pub fn requests(&self) -> Vec<Recorded> {
        self.log.lock().unwrap().clone()
    }
}

pub fn completion(content: &str) -> String {
    serde_json::json!({
        "id": "stub",
        "object": "chat.completion",
        "choices": [{"index": 0, "message": {"role": "assistant", "content": content}, "finish_reason": "stop"}]
    })
    .to_string()
}

fn serve(stream: TcpStream, log: Arc<Mutex<Vec<Recorded>>>, respond: Arc<Responder>) {
    let mut writer = stream.try_clone().unwrap();
    let mut reader = BufReader::new(stream);
    loop {
        let mut request_line = String::new();
        if reader.read_line(&mut request_line).unwrap_or(0) == 0 {
            return;
        }
        let at = Instant::now();
        let mut parts = request_line.split_whitespace();
        let method = parts.next().unwrap_or_default().to_string();
        let path = parts.next().unwrap_or_default().to_string();
        let mut headers = BTreeMap::new();
        loop {
            let mut line = String::new();
            if reader.read_line(&mut line).unwrap_or(0) == 0 {
                return;
            }
            let line = line.trim_end();
            if line.is_empty() {
                break;
            }
            if let Some((k, v)) = line.split_once(':') {
                headers.insert(k.trim().to_ascii_lowercase(), v.trim().to_string());
            }
        }
        let len: usize = headers
            .get("content-length")
            .and_then(|v| v.parse().ok())
            .unwrap_or(0);
        let mut body = vec![0; len];
        if reader.read_exact(&mut body).is_err() {
            return;
        }
        let recorded = Recorded { at, method, path, headers, body };
        let index = {
            let mut log = log.lock().unwrap();
            log.push(recorded.clone());
            log.len() - 1
        };
        let (status, payload) = respond(index, &recorded);
        let reason = match status {
            200 => "OK",
            429 => "Too Many Requests",
            500 => "Internal Server Error",
            503 => "Service Unavailable",
            _ => "Status",
        };
        let response = format!(
            "HTTP/1.1 {status} {reason}\r\ncontent-type: application/json\r\ncontent-length: {}\r\n\r\n{payload}",
            payload.len()
        );
        if writer.write_all(response.as_bytes()).is_err() {
            return;
        }
    }
}

// ---------------------------------------------------------------------------
// Pearson oracle: exact integer arithmetic
// ---------------------------------------------------------------------------

/// Splits a finite f64 into (mantissa, exponent) with value = m * 2^e.
fn decompose(v: f64) -> (BigInt, i32) {
    if v == 0.0 {
        return (BigInt::from(0), 0);
    }
    let bits = v.to_bits();
    let sign = if bits >> 63 == 1 { -1i64 } else { 1 };
    let exp = ((bits >> 52) & 0x7ff) as i32;
    let frac = bits & ((1u64 << 52) - 1);
    let (mant, e) = if exp == 0 {
        (frac, -1074)
    } else {
        (frac | (1u64 << 52), exp - 1075)
    };
    (BigInt::from(sign) * BigInt::from(mant), e)
}

/// Every value scaled to a common power of two, as exact integers.
fn to_integers(values: &[f64]) -> Vec<BigInt> {
    let parts: Vec<(BigInt, i32)> = values.iter().map(|&v| decompose(v)).collect();
    let min_e = parts.iter().map(|p| p.1).min().unwrap_or(0);
    parts
        .into_iter()
        .map(|(m, e)| m << ((e - min_e) as usize))
        .collect()
}

fn big_to_f64(v: &BigInt) -> f64 {
    v.to_string().parse().unwrap()
}

/// r from the mean-centered definition, evaluated exactly: with integers X_i
/// and n*X_i - sum(X) = n*(X_i - mean), the factor n cancels in the ratio.
pub fn pearson_oracle(x: &[f64], y: &[f64]) -> Option<f64> {
    assert_eq!(x.len(), y.len());
    let n = BigInt::from(x.len());
    let xi = to_integers(x);
    let yi = to_integers(y);
    let sx: BigInt = xi.iter().sum();
    let sy: BigInt = yi.iter().sum();
    let dx: Vec<BigInt> = xi.iter().map(|v| &n * v - &sx).collect();
    let dy: Vec<BigInt> = yi.iter().map(|v| &n * v - &sy).collect();
    let sxy: BigInt = dx.iter().zip(&dy).map(|(a, b)| a * b).sum();
    let sxx: BigInt = dx.iter().map(|a| a * a).sum();
    let syy: BigInt = dy.iter().map(|b| b * b).sum();
    if sxx == BigInt::from(0) || syy == BigInt::from(0) {
        return None;
    }
    // r^2 = sxy^2 / (sxx * syy), computed as a ratio of big integers with
    // enough precision bits kept before the final f64 conversion.
    let num = &sxy * &sxy;
    let den = &sxx * &syy;
    let shift = 120usize;
    let scaled = (num << shift) / &den;
    let r2 = big_to_f64(&scaled) / 2f64.powi(shift as i32);
    let r = r2.sqrt();
    Some(if sxy < BigInt::from(0) { -r } else { r })
}

// ---------------------------------------------------------------------------
// Mock noise replay
// ---------------------------------------------------------------------------

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Replays the documented mock noise: first standard-normal draw from the
/// per-pair stream, clamped to [0, 4] and rounded to two decimals.
pub fn replay_noisy_score(reference: f64, sigma: f64, seed: u64, pair_id: u64) -> f64 {
    let stream_seed = splitmix(splitmix(splitmix(seed) ^ pair_id) ^ u64::MAX);
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed);
    let z: f64 = rng.sample(rand_distr::StandardNormal);
    let v = (reference + sigma * z).clamp(0.0, 4.0);
    (v * 100.0).round() / 100.0
}

// ---------------------------------------------------------------------------
// String-metric oracles
// ---------------------------------------------------------------------------

/// Full (n+1) x (m+1) edit-distance matrix.
pub fn levenshtein_matrix(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for (j, cell) in d[0].iter_mut().enumerate() {
        *cell = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let cost = usize::from(a[i - 1] != b[j - 1]);
            d[i][j] = (d[i - 1][j] + 1).min(d[i][j - 1] + 1).min(d[i - 1][j - 1] + cost);
        }
    }
    d[a.len()][b.len()]
}

pub fn grams(s: &str, q: usize) -> Vec<String> {
    let chars: Vec<char> = s.chars().collect();
    if chars.is_empty() {
        return vec![];
    }
    if chars.len() < q {
        return vec![s.to_string()];
    }
    (0..=chars.len() - q).map(|i| chars[i..i + q].iter().collect()).collect()
}

fn jaccard_of<T: Ord + Clone>(a: &[T], b: &[T]) -> f64 {
    let sa: BTreeSet<T> = a.iter().cloned().collect();
    let sb: BTreeSet<T> = b.iter().cloned().collect();
    if sa.is_empty() && sb.is_empty() {
        return 1.0;
    }
    let inter = sa.iter().filter(|g| sb.contains(*g)).count();
    let union: BTreeSet<T> = sa.union(&sb).cloned().collect();
    inter as f64 / union.len() as f64
}

pub fn qgram_oracle(a: &str, b: &str, q: usize) -> f64 {
    jaccard_of(&grams(a, q), &grams(b, q))
}

pub fn token_jaccard_oracle(a: &str, b: &str) -> f64 {
    let tok = |s: &str| -> Vec<String> {
        s.split_whitespace()
            .map(|t| t.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase())
            .filter(|t| !t.is_empty())
            .collect()
    };
    jaccard_of(&tok(a), &tok(b))
}

/// Cosine over a dense vector indexed by the union of grams.
pub fn cosine_oracle(a: &str, b: &str, q: usize) -> f64 {
    let ga = grams(a, q);
    let gb = grams(b, q);
    if ga.is_empty() && gb.is_empty() {
        return 1.0;
    }
    if ga.is_empty() || gb.is_empty() {
        return 0.0;
    }
    let vocab: Vec<String> = ga.iter().chain(&gb).cloned().collect::<BTreeSet<_>>().into_iter().collect();
    let count = |gs: &[String], g: &String| gs.iter().filter(|x| *x == g).count() as f64;
    let va: Vec<f64> = vocab.iter().map(|g| count(&ga, g)).collect();
    let vb: Vec<f64> = vocab.iter().map(|g| count(&gb, g)).collect();
    let dot: f64 = va.iter().zip(&vb).map(|(x, y)| x * y).sum();
    let na: f64 = va.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = vb.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}
