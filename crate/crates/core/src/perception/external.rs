//! Newline-delimited JSON client for out-of-process detectors.
//!
//! Each request is one line `{"id", "image", "scene", "camera"}`; the
//! detector answers with one line `{"id", "boxes": [{"cx","cy","w","h","conf"}]}`
//! in request order. A bare `[]` (or bare box array) answers the pending
//! request. Responses carrying an id older than the pending one belong to
//! requests that already timed out and are discarded.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::process::{Child, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::Duration;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{AssumedClass, IntruderEstimate, Perception, PerceptionError, PerceptionSource};
use crate::encounters::Conditions;
use crate::geometry::{estimate_relative_from_box, AircraftState, BoundingBox, CameraModel};
use crate::rng::SimRng;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(5);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WireCamera {
    pub hfov: f64,
    pub width: u32,
    pub height: u32,
}

impl From<&CameraModel> for WireCamera {
    fn from(c: &CameraModel) -> Self {
        Self { hfov: c.hfov, width: c.width, height: c.height }
    }
}

/// Everything the detector is told about the scene. Intruder truth is
/// deliberately absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SceneDescription {
    pub ownship: AircraftState,
    pub conditions: Conditions,
    /// Seconds since the start of the encounter.
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorRequest {
    pub id: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub image: Option<String>,
    pub scene: SceneDescription,
    pub camera: WireCamera,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WireBox {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
    pub conf: f64,
}

impl WireBox {
    pub fn to_box(self) -> BoundingBox {
        BoundingBox::ground_truth(self.cx, self.cy, self.w, self.h).with_confidence(self.conf)
    }

    fn is_valid(&self) -> bool {
        [self.cx, self.cy, self.w, self.h, self.conf].iter().all(|v| v.is_finite()) && self.w > 0.0 && self.h > 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorResponse {
    pub id: u64,
    pub boxes: Vec<WireBox>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawResponse {
    Full(DetectorResponse),
    Bare(Vec<WireBox>),
}

/// What to do when the detector does not answer in time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum TimeoutPolicy {
    /// Treat the step as undetected and log a warning.
    #[default]
    Undetected,
    Fail,
}

/// One connection to a detector: a spawned child or a TCP socket.
pub struct DetectorClient {
    writer: Box<dyn Write + Send>,
    lines: Receiver<std::io::Result<String>>,
    child: Option<Child>,
    pub timeout: Duration,
}

impl std::fmt::Debug for DetectorClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DetectorClient").field("child", &self.child.as_ref().map(Child::id)).finish()
    }
}

fn io_err(e: std::io::Error) -> PerceptionError {
    PerceptionError::Io(e.to_string())
}

impl DetectorClient {
    /// Wraps an arbitrary pair of streams; lines are read on a helper thread.
    pub fn from_streams<R, W>(reader: R, writer: W) -> Self
    where
        R: Read + Send + 'static,
        W: Write + Send + 'static,
    {
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(reader).lines() {
                let stop = line.is_err();
                if tx.send(line).is_err() || stop {
                    break;
                }
            }
        });
        Self { writer: Box::new(writer), lines: rx, child: None, timeout: DEFAULT_TIMEOUT }
    }

    /// Runs `command` through `sh -c` and talks over its stdin/stdout.
    pub fn spawn(command: &str) -> Result<Self, PerceptionError> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(io_err)?;
        let stdin = child.stdin.take().ok_or_else(|| PerceptionError::Io("child stdin unavailable".into()))?;
        let stdout = child.stdout.take().ok_or_else(|| PerceptionError::Io("child stdout unavailable".into()))?;
        let mut client = Self::from_streams(stdout, stdin);
        client.child = Some(child);
        Ok(client)
    }

    pub fn connect(addr: &str) -> Result<Self, PerceptionError> {
        let stream = TcpStream::connect(addr).map_err(io_err)?;
        stream.set_nodelay(true).map_err(io_err)?;
        let reader = stream.try_clone().map_err(io_err)?;
        Ok(Self::from_streams(reader, stream))
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    /// Sends one request and waits for its response.
    pub fn request(&mut self, req: &DetectorRequest) -> Result<DetectorResponse, PerceptionError> {
        let mut line = serde_json::to_string(req).map_err(|e| PerceptionError::Io(e.to_string()))?;
        line.push('\n');
        self.writer.write_all(line.as_bytes()).map_err(io_err)?;
        self.writer.flush().map_err(io_err)?;
        let deadline = std::time::Instant::now() + self.timeout;
        loop {
            let left = deadline.saturating_duration_since(std::time::Instant::now());
            let line = match self.lines.recv_timeout(left) {
                Ok(Ok(line)) => line,
                Ok(Err(e)) => return Err(io_err(e)),
                Err(RecvTimeoutError::Timeout) => {
                    return Err(PerceptionError::Timeout { id: req.id, timeout_ms: self.timeout.as_millis() as u64 })
                }
                Err(RecvTimeoutError::Disconnected) => return Err(PerceptionError::Closed),
            };
            if line.trim().is_empty() {
                continue;
            }
            let protocol = |message: String| PerceptionError::Protocol { message, line: line.clone() };
            let resp = match serde_json::from_str::<RawResponse>(&line) {
                Ok(RawResponse::Full(r)) => r,
                Ok(RawResponse::Bare(boxes)) => DetectorResponse { id: req.id, boxes },
                Err(e) => return Err(protocol(format!("malformed response: {e}"))),
            };
            if resp.id < req.id {
                continue;
            }
            if resp.id > req.id {
                return Err(protocol(format!("response id {} does not match request {}", resp.id, req.id)));
            }
            if let Some(b) = resp.boxes.iter().find(|b| !b.is_valid()) {
                return Err(protocol(format!("invalid box {b:?}")));
            }
            return Ok(resp);
        }
    }
}

impl Drop for DetectorClient {
    fn drop(&mut self) {
        if let Some(child) = self.child.as_mut() {
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

/// Perception backend backed by an external detector.
#[derive(Debug)]
pub struct ExternalDetector {
    pub client: DetectorClient,
    pub camera: CameraModel,
    pub assumed: AssumedClass,
    pub on_timeout: TimeoutPolicy,
    /// Boxes below this confidence are ignored.
    pub min_confidence: f64,
    /// Simulation step between calls, used for the scene time.
    pub dt: f64,
    /// Timeouts absorbed as misses so far.
    pub warnings: u64,
    next_id: u64,
    step: u64,
}

impl ExternalDetector {
    pub fn new(client: DetectorClient, camera: CameraModel) -> Self {
        Self {
            client,
            camera,
            assumed: AssumedClass::default(),
            on_timeout: TimeoutPolicy::default(),
            min_confidence: 0.0,
            dt: 1.0,
            warnings: 0,
            next_id: 0,
            step: 0,
        }
    }
}

impl Perception for ExternalDetector {
    fn begin_encounter(&mut self, _seed: u64) {
        self.step = 0;
    }

    fn perceive(
        &mut self,
        ownship: &AircraftState,
        _intruder: &AircraftState,
        conditions: &Conditions,
        rng: &mut SimRng,
    ) -> Result<Option<IntruderEstimate>, PerceptionError> {
        let _: f64 = rng.gen();
        let req = DetectorRequest {
            id: self.next_id,
            image: None,
            scene: SceneDescription { ownship: *ownship, conditions: *conditions, time: self.step as f64 * self.dt },
            camera: WireCamera::from(&self.camera),
        };
        self.next_id += 1;
        self.step += 1;
        let resp = match self.client.request(&req) {
            Ok(r) => r,
            Err(e @ PerceptionError::Timeout { .. }) if self.on_timeout == TimeoutPolicy::Undetected => {
                log::warn!("{e}; treating as undetected");
                self.warnings += 1;
                return Ok(None);
            }
            Err(e) => return Err(e),
        };
        let best = resp
            .boxes
            .iter()
            .filter(|b| b.conf >= self.min_confidence)
            .max_by(|a, b| a.conf.total_cmp(&b.conf));
        let Some(best) = best else { return Ok(None) };
        let bbox = best.to_box();
        let rel = estimate_relative_from_box(&self.camera, &bbox, &self.assumed.resolve(conditions), ownship)?;
        Ok(Some(IntruderEstimate { rel, detected_box: Some(bbox), source: PerceptionSource::External }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn detector(cmd: &str, timeout_ms: u64) -> ExternalDetector {
        let client = DetectorClient::spawn(cmd).unwrap().with_timeout(Duration::from_millis(timeout_ms));
        ExternalDetector::new(client, CameraModel::default())
    }

    fn step(d: &mut ExternalDetector) -> Result<Option<IntruderEstimate>, PerceptionError> {
        let own = AircraftState::level(0.0, 0.0, 1000.0, 0.0, 60.0);
        let int = AircraftState::level(0.0, 500.0, 1000.0, 180.0, 60.0);
        d.perceive(&own, &int, &Conditions::default(), &mut SimRng::seed_from_u64(1))
    }

    const ECHO: &str = r#"while read -r line; do id=$(printf '%s' "$line" | sed 's/^{"id":\([0-9]*\).*/\1/'); printf '{"id":%s,"boxes":[{"cx":0.5,"cy":0.5,"w":0.02,"h":0.01,"conf":0.9}]}\n' "$id"; done"#;

    #[test]
    fn echoing_responder_yields_estimates() {
        let mut d = detector(ECHO, 5000);
        for _ in 0..3 {
            let est = step(&mut d).unwrap().unwrap();
            assert_eq!(est.source, PerceptionSource::External);
            assert!(est.rel.horizontal_range > 0.0);
            assert!(est.rel.bearing.abs() < 1e-9);
        }
    }

    #[test]
    fn empty_list_is_undetected() {
        let mut d = detector("while read -r line; do echo '[]'; done", 5000);
        assert!(step(&mut d).unwrap().is_none());
        assert!(step(&mut d).unwrap().is_none());
    }

    #[test]
    fn invalid_json_is_protocol_error() {
        let mut d = detector("while read -r line; do echo 'not json'; done", 5000);
        match step(&mut d) {
            Err(PerceptionError::Protocol { line, .. }) => assert_eq!(line, "not json"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn mismatched_id_is_protocol_error() {
        let mut d = detector(r#"while read -r line; do echo '{"id":7,"boxes":[]}'; done"#, 5000);
        assert!(matches!(step(&mut d), Err(PerceptionError::Protocol { .. })));
    }

    #[test]
    fn timeout_policies() {
        let mut d = detector("cat > /dev/null", 50);
        assert!(step(&mut d).unwrap().is_none());
        assert_eq!(d.warnings, 1);
        d.on_timeout = TimeoutPolicy::Fail;
        assert!(matches!(step(&mut d), Err(PerceptionError::Timeout { .. })));
    }

    #[test]
    fn low_confidence_boxes_ignored() {
        let mut d = detector(ECHO, 5000);
        d.min_confidence = 0.95;
        assert!(step(&mut d).unwrap().is_none());
    }

    #[test]
    fn works_over_in_memory_pipes() {
        let (req_r, req_w) = std::io::pipe().unwrap();
        let (resp_r, mut resp_w) = std::io::pipe().unwrap();
        thread::spawn(move || {
            for line in BufReader::new(req_r).lines() {
                let req: DetectorRequest = serde_json::from_str(&line.unwrap()).unwrap();
                assert!(req.image.is_none());
                writeln!(resp_w, "{}", serde_json::to_string(&DetectorResponse { id: req.id, boxes: vec![] }).unwrap())
                    .unwrap();
            }
        });
        let mut d = ExternalDetector::new(DetectorClient::from_streams(resp_r, req_w), CameraModel::default());
        assert!(step(&mut d).unwrap().is_none());
    }
}
