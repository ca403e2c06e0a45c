#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::thread::JoinHandle;

use motionopt::motion::{Frame, MotionSequence};
use nalgebra::Matrix3;
use rand::Rng;
use rand_distr::StandardNormal;

/// Serve one HTTP request with a canned JSON body. Returns the URL and a
/// handle yielding the request body.
pub fn mock_planner(reply: &str) -> (String, JoinHandle<String>) {
    let listener = TcpListener::bind("127.0.0.1:0").expect("bind loopback");
    let url = format!("http://{}/plan", listener.local_addr().unwrap());
    let reply = reply.to_string();
    let handle = std::thread::spawn(move || {
        let (stream, _) = listener.accept().expect("client connects");
        let mut reader = BufReader::new(stream.try_clone().unwrap());
        let mut length = 0usize;
        loop {
            let mut line = String::new();
            reader.read_line(&mut line).unwrap();
            let line = line.trim_end();
            if line.is_empty() {
                break;
            }
            let lower = line.to_ascii_lowercase();
            if let Some(v) = lower.strip_prefix("content-length:") {
                length = v.trim().parse().unwrap();
            }
        }
        let mut body = vec![0u8; length];
        reader.read_exact(&mut body).unwrap();
        let mut stream = stream;
        write!(
            stream,
            "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
            reply.len(),
            reply
        )
        .unwrap();
        stream.flush().unwrap();
        String::from_utf8(body).unwrap()
    });
    (url, handle)
}

/// A loopback URL with nothing listening on it.
pub fn dead_url() -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    drop(listener);
    format!("http://{addr}/plan")
}

pub fn normal<R: Rng>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Rotation by `|v|` radians about `v`, written out term by term.
pub fn rodrigues(v: [f64; 3]) -> Matrix3<f64> {
    let theta = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    if theta == 0.0 {
        return Matrix3::identity();
    }
    let k = [v[0] / theta, v[1] / theta, v[2] / theta];
    let kx = Matrix3::new(0.0, -k[2], k[1], k[2], 0.0, -k[0], -k[1], k[0], 0.0);
    Matrix3::identity() + kx * theta.sin() + kx * kx * (1.0 - theta.cos())
}

/// First two columns of `m`.
pub fn to_6d(m: &Matrix3<f64>) -> [f64; 6] {
    [m[(0, 0)], m[(1, 0)], m[(2, 0)], m[(0, 1)], m[(1, 1)], m[(2, 1)]]
}

/// Rotation vector with angle below `max_angle`.
pub fn random_rotvec<R: Rng>(rng: &mut R, max_angle: f64) -> [f64; 3] {
    let d = [normal(rng), normal(rng), normal(rng)];
    let n = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
    let angle = rng.random::<f64>() * max_angle;
    [d[0] / n * angle, d[1] / n * angle, d[2] / n * angle]
}

/// Frames along `translations` with random joint rotations up to
/// `max_angle` and orientation up to `max_angle / 2`.
pub fn random_motion<R: Rng>(rng: &mut R, translations: &[[f64; 3]], joints: usize, max_angle: f64) -> MotionSequence {
    let frames = translations
        .iter()
        .map(|r| Frame {
            r: *r,
            gamma: to_6d(&rodrigues(random_rotvec(rng, 0.5 * max_angle))),
            theta: (0..joints)
                .map(|_| to_6d(&rodrigues(random_rotvec(rng, max_angle))))
                .collect(),
        })
        .collect();
    MotionSequence::new(30.0, frames).unwrap()
}
