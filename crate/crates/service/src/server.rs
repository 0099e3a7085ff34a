use std::sync::Arc;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::Response;
use axum::routing::get;
use axum::Router;
use futures::{SinkExt, StreamExt};
use tokio::net::TcpListener;

use crate::session::Service;

pub fn router(service: Arc<Service>) -> Router {
    Router::new().route("/session", get(upgrade)).with_state(service)
}

/// Serves `/session` until the listener fails.
pub async fn serve(listener: TcpListener, service: Arc<Service>) -> std::io::Result<()> {
    axum::serve(listener, router(service)).await
}

async fn upgrade(ws: WebSocketUpgrade, State(service): State<Arc<Service>>) -> Response {
    ws.on_upgrade(move |socket| connection(socket, service))
}

async fn connection(socket: WebSocket, service: Arc<Service>) {
    // Subscribing queues the snapshot before any later broadcast.
    let client = service.hub().subscribe();
    let (mut sink, mut stream) = socket.split();
    let writer = {
        let client = Arc::clone(&client);
        tokio::spawn(async move {
            loop {
                for msg in client.drain().await {
                    if sink.send(Message::Text(msg.to_line().into())).await.is_err() {
                        return;
                    }
                }
            }
        })
    };
    while let Some(Ok(msg)) = stream.next().await {
        match msg {
            Message::Text(text) => service.handle_text(&client, text.as_str()).await,
            Message::Close(_) => break,
            _ => {}
        }
    }
    writer.abort();
    service.hub().unsubscribe(&client);
}
