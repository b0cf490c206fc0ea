//! Timer and UART peripherals.
//!
//! The timer is a one-shot compare timer with single-cycle resolution: the
//! interrupt becomes pending at the first instruction boundary at which
//! `compare` execution cycles have elapsed since arming. Interrupt-entry
//! latency is charged to the CPU cycle counter but never to the timer, so a
//! compare value maps one-to-one onto victim execution cycles.
//!
//! The UART is an append-only byte channel with an analytic 8N1 timing model
//! (ten bit times per byte); no baud-accurate simulation.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PeriphError {
    #[error("timer compare value must be at least 1")]
    ZeroCompare,
    #[error("baud rate must be positive")]
    ZeroBaud,
}

/// One-shot compare timer.
#[derive(Debug, Clone, Default)]
pub struct Timer {
    pub compare: u64,
    pub running: bool,
    pub irq_enabled: bool,
    elapsed: u64,
    pending: bool,
}

impl Timer {
    /// Arm for an interrupt after `compare` execution cycles. One-shot: the
    /// attack code re-arms explicitly on every iteration.
    pub fn arm(&mut self, compare: u64) -> Result<(), PeriphError> {
        if compare == 0 {
            return Err(PeriphError::ZeroCompare);
        }
        self.compare = compare;
        self.elapsed = 0;
        self.running = true;
        self.irq_enabled = true;
        self.pending = false;
        Ok(())
    }

    pub fn stop(&mut self) {
        self.running = false;
        self.pending = false;
        self.elapsed = 0;
    }

    /// Account `cycles` of retired execution. Returns true when the compare
    /// point has been reached and the interrupt request goes pending.
    pub fn tick(&mut self, cycles: u32) -> bool {
        if !self.running {
            return false;
        }
        self.elapsed += cycles as u64;
        if self.elapsed >= self.compare {
            self.running = false;
            if self.irq_enabled {
                self.pending = true;
            }
        }
        self.pending
    }

    pub fn pending(&self) -> bool {
        self.pending
    }

    pub fn acknowledge(&mut self) {
        self.pending = false;
    }
}

/// Append-only exfiltration channel.
#[derive(Debug, Clone)]
pub struct UartChannel {
    pub bytes: Vec<u8>,
    pub baud: u32,
}

impl Default for UartChannel {
    fn default() -> Self {
        UartChannel {
            bytes: Vec::new(),
            baud: 115_200,
        }
    }
}

impl UartChannel {
    pub fn send(&mut self, data: &[u8]) {
        self.bytes.extend_from_slice(data);
    }

    pub fn len(&self) -> usize {
        self.bytes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bytes.is_empty()
    }
}

/// Seconds to move `n_bytes` over an 8N1 serial line at `baud`.
pub fn estimate_transfer_seconds(n_bytes: u64, baud: u32) -> Result<f64, PeriphError> {
    if baud == 0 {
        return Err(PeriphError::ZeroBaud);
    }
    Ok(n_bytes as f64 * 10.0 / baud as f64)
}
