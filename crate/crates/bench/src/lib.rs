//! Fixtures shared by the criterion benches.

use tfqkd::{ChannelParams, ProtocolParams};

/// Reference channel at the given loss.
pub fn reference_channel(loss_db: f64) -> ChannelParams {
    ChannelParams::reference(loss_db).expect("reference channel is valid")
}

/// Protocol settings near the optimum for mid-range loss.
pub fn typical_protocol(m: usize) -> ProtocolParams {
    ProtocolParams::new(m, 0.05, 0.002, 0.0, 1.1).expect("typical protocol is valid")
}
