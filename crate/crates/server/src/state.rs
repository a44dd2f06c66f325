//! Service state: the engine once loaded, the shared plane selection and
//! the session budget.

use std::collections::VecDeque;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, OnceLock, RwLock};

use liveview_core::geometry::PlaneSet;
use liveview_core::mpi::select_planes;
use liveview_tensor::Tensor;

use crate::engine::Engine;
use crate::error::Result;

/// Plane selection made through `POST /select_planes`.
#[derive(Clone, Debug, PartialEq)]
pub struct Selection {
    pub k: usize,
    pub indices: Vec<usize>,
    pub planes: PlaneSet,
}

#[derive(Default)]
pub struct PlaneState {
    /// Alphas of the most recent full-D frame from any session.
    pub last_full_alpha: Option<Tensor<f32>>,
    pub selection: Option<Selection>,
}

pub struct AppState {
    engine: OnceLock<Arc<Engine>>,
    pub planes: RwLock<PlaneState>,
    sessions: AtomicUsize,
    pub max_sessions: usize,
}

/// Holds one session slot until dropped.
pub struct SessionGuard(Arc<AppState>);

impl Drop for SessionGuard {
    fn drop(&mut self) {
        self.0.sessions.fetch_sub(1, Ordering::SeqCst);
    }
}

impl AppState {
    pub fn new(max_sessions: usize) -> Arc<Self> {
        Arc::new(Self {
            engine: OnceLock::new(),
            planes: RwLock::new(PlaneState::default()),
            sessions: AtomicUsize::new(0),
            max_sessions,
        })
    }

    pub fn with_engine(engine: Engine, max_sessions: usize) -> Arc<Self> {
        let state = Self::new(max_sessions);
        state.install(engine);
        state
    }

    /// Makes the service ready; later calls are ignored.
    pub fn install(&self, engine: Engine) {
        let _ = self.engine.set(Arc::new(engine));
    }

    pub fn engine(&self) -> Option<Arc<Engine>> {
        self.engine.get().cloned()
    }

    pub fn try_open_session(self: &Arc<Self>) -> Option<SessionGuard> {
        let prev = self.sessions.fetch_add(1, Ordering::SeqCst);
        if prev >= self.max_sessions {
            self.sessions.fetch_sub(1, Ordering::SeqCst);
            return None;
        }
        Some(SessionGuard(self.clone()))
    }

    pub fn active_sessions(&self) -> usize {
        self.sessions.load(Ordering::SeqCst)
    }

    pub fn record_full_alpha(&self, alpha: &Tensor<f32>) {
        self.planes.write().expect("plane state lock").last_full_alpha = Some(alpha.clone());
    }

    pub fn selection(&self) -> Option<Selection> {
        self.planes.read().expect("plane state lock").selection.clone()
    }

    /// Selects `k` planes from the latest full-D alphas, rendering a
    /// reference frame at the rig centre first if none exists yet.
    pub fn select(&self, engine: &Engine, k: usize) -> Result<Selection> {
        let alpha = self.planes.read().expect("plane state lock").last_full_alpha.clone();
        let alpha = match alpha {
            Some(a) => a,
            None => {
                let frame = engine.render(&engine.rig.center_camera(), &engine.planes)?;
                self.record_full_alpha(&frame.rendering.alpha);
                frame.rendering.alpha
            }
        };
        let sel = select_planes(&alpha, k)?;
        let selection = Selection { k, planes: engine.planes.subset(&sel.indices)?, indices: sel.indices };
        self.planes.write().expect("plane state lock").selection = Some(selection.clone());
        Ok(selection)
    }
}

/// Rolling render latency over the last `capacity` frames.
#[derive(Clone, Debug)]
pub struct LatencyWindow {
    samples: VecDeque<f64>,
    capacity: usize,
}

impl LatencyWindow {
    pub const DEFAULT_CAPACITY: usize = 60;

    pub fn new(capacity: usize) -> Self {
        Self { samples: VecDeque::with_capacity(capacity), capacity: capacity.max(1) }
    }

    pub fn push(&mut self, ms: f64) {
        if self.samples.len() == self.capacity {
            self.samples.pop_front();
        }
        self.samples.push_back(ms);
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn mean(&self) -> Option<f64> {
        (!self.samples.is_empty()).then(|| self.samples.iter().sum::<f64>() / self.samples.len() as f64)
    }
}
