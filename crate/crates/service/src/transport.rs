use std::sync::mpsc::{Receiver, RecvTimeoutError};
use std::time::Duration;

use tokio::sync::mpsc::UnboundedSender;

use ddz_core::evaluation::{Disconnected, HumanTransport};

/// Blocking side of a connection: frames arrive from the socket task and
/// replies go back to it.
pub(crate) struct ChannelTransport {
    inbound: Receiver<String>,
    outbound: UnboundedSender<String>,
}

impl ChannelTransport {
    pub(crate) fn new(inbound: Receiver<String>, outbound: UnboundedSender<String>) -> Self {
        ChannelTransport { inbound, outbound }
    }
}

impl HumanTransport for ChannelTransport {
    fn send(&mut self, frame: &str) -> Result<(), Disconnected> {
        self.outbound.send(frame.to_string()).map_err(|_| Disconnected)
    }

    fn recv(&mut self, deadline: Option<Duration>) -> Result<Option<String>, Disconnected> {
        match deadline {
            None => self.inbound.recv().map(Some).map_err(|_| Disconnected),
            Some(d) => match self.inbound.recv_timeout(d) {
                Ok(f) => Ok(Some(f)),
                Err(RecvTimeoutError::Timeout) => Ok(None),
                Err(RecvTimeoutError::Disconnected) => Err(Disconnected),
            },
        }
    }
}
