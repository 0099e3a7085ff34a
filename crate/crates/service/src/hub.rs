//! Broadcast fan-out. Each client owns a queue drained by its socket
//! writer. State-like messages are never dropped; when a slow client falls
//! behind, its oldest pending metrics are discarded instead.

use std::collections::VecDeque;
use std::sync::{Arc, Mutex, MutexGuard};

use tokio::sync::Notify;

use crate::protocol::ServerMessage;

/// Pending metrics messages a client may accumulate before old ones drop.
pub const MAX_PENDING_METRICS: usize = 16;

#[derive(Default)]
pub struct ClientQueue {
    pending: Mutex<VecDeque<ServerMessage>>,
    notify: Notify,
}

impl ClientQueue {
    pub fn push(&self, msg: ServerMessage) {
        let mut q = self.pending.lock().unwrap();
        if matches!(msg, ServerMessage::Metrics { .. }) {
            let queued = q.iter().filter(|m| matches!(m, ServerMessage::Metrics { .. })).count();
            if queued >= MAX_PENDING_METRICS {
                if let Some(i) = q.iter().position(|m| matches!(m, ServerMessage::Metrics { .. })) {
                    q.remove(i);
                }
            }
        }
        q.push_back(msg);
        drop(q);
        self.notify.notify_one();
    }

    /// Waits until at least one message is pending, then takes them all.
    pub async fn drain(&self) -> Vec<ServerMessage> {
        loop {
            {
                let mut q = self.pending.lock().unwrap();
                if !q.is_empty() {
                    return q.drain(..).collect();
                }
            }
            self.notify.notified().await;
        }
    }
}

#[derive(Default)]
pub struct HubState {
    clients: Vec<Arc<ClientQueue>>,
    last_state: Option<ServerMessage>,
    last_boundaries: Option<ServerMessage>,
}

impl HubState {
    /// Sends to every client, remembering state and boundaries for the
    /// snapshot given to late joiners.
    pub fn broadcast(&mut self, msg: ServerMessage) {
        match msg {
            ServerMessage::State { .. } => self.last_state = Some(msg.clone()),
            ServerMessage::Boundaries { .. } => self.last_boundaries = Some(msg.clone()),
            _ => {}
        }
        for c in &self.clients {
            c.push(msg.clone());
        }
    }
}

#[derive(Default)]
pub struct Hub {
    inner: Mutex<HubState>,
}

impl Hub {
    /// Holding the guard orders everything broadcast under it before any
    /// message another thread broadcasts afterwards.
    pub fn lock(&self) -> MutexGuard<'_, HubState> {
        self.inner.lock().unwrap()
    }

    pub fn broadcast(&self, msg: ServerMessage) {
        self.lock().broadcast(msg);
    }

    /// Adds a client whose queue starts with the current state snapshot.
    pub fn subscribe(&self) -> Arc<ClientQueue> {
        let mut hub = self.lock();
        let client = Arc::new(ClientQueue::default());
        for m in [&hub.last_state, &hub.last_boundaries].into_iter().flatten() {
            client.push(m.clone());
        }
        hub.clients.push(Arc::clone(&client));
        client
    }

    pub fn unsubscribe(&self, client: &Arc<ClientQueue>) {
        self.lock().clients.retain(|c| !Arc::ptr_eq(c, client));
    }

    pub fn client_count(&self) -> usize {
        self.lock().clients.len()
    }
}
