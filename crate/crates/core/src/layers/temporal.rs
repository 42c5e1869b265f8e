use super::weights::WfmLayerParams;
use crate::error::{Error, Result};
use crate::ifme::ifme_wfm;
use crate::manifold::Manifold;

/// Shape of a temporal wFM layer: a window of `kernel` consecutive frames
/// from every input channel, advanced by `stride`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TemporalWfmSpec {
    pub kernel: usize,
    pub stride: usize,
    pub in_channels: usize,
    pub out_channels: usize,
}

impl TemporalWfmSpec {
    pub fn new(kernel: usize, stride: usize, in_channels: usize, out_channels: usize) -> Result<Self> {
        let spec = Self {
            kernel,
            stride,
            in_channels,
            out_channels,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("kernel", self.kernel),
            ("stride", self.stride),
            ("in_channels", self.in_channels),
            ("out_channels", self.out_channels),
        ] {
            if v == 0 {
                return Err(Error::param(name, "must be at least 1"));
            }
        }
        Ok(())
    }

    /// Points per window.
    pub fn slots(&self) -> usize {
        self.in_channels * self.kernel
    }

    pub fn param_count(&self) -> usize {
        self.out_channels * self.slots()
    }

    /// `floor((frames − kernel) / stride) + 1`.
    pub fn output_len(&self, frames: usize) -> Result<usize> {
        if frames < self.kernel {
            return Err(Error::param(
                "kernel",
                format!("window of {} exceeds sequence length {frames}", self.kernel),
            ));
        }
        Ok((frames - self.kernel) / self.stride + 1)
    }
}

fn check_inputs<P>(inputs: &[Vec<P>], spec: &TemporalWfmSpec, params: &WfmLayerParams) -> Result<usize> {
    spec.validate()?;
    if inputs.len() != spec.in_channels {
        return Err(Error::LengthMismatch {
            what: "input channels",
            left: inputs.len(),
            right: spec.in_channels,
        });
    }
    if params.out_channels() != spec.out_channels || params.slots() != spec.slots() {
        return Err(Error::DimensionMismatch {
            expected: format!("{}x{} parameters", spec.out_channels, spec.slots()),
            got: format!("{}x{}", params.out_channels(), params.slots()),
        });
    }
    let frames = inputs[0].len();
    if let Some(bad) = inputs.iter().find(|c| c.len() != frames) {
        return Err(Error::LengthMismatch {
            what: "frames per input channel",
            left: frames,
            right: bad.len(),
        });
    }
    spec.output_len(frames)
}

/// Output sequence of a single channel `o`, using `theta` as that channel's
/// raw weights.
pub fn temporal_channel_forward<M: Manifold>(
    manifold: &M,
    inputs: &[Vec<M::Point>],
    spec: &TemporalWfmSpec,
    theta: &[f64],
) -> Result<Vec<M::Point>> {
    if theta.len() != spec.slots() {
        return Err(Error::LengthMismatch {
            what: "channel weights vs window slots",
            left: theta.len(),
            right: spec.slots(),
        });
    }
    let frames = inputs.first().map_or(0, Vec::len);
    let out_len = spec.output_len(frames)?;
    let w = super::weights::weight_map(theta);
    let mut window = Vec::with_capacity(spec.slots());
    (0..out_len)
        .map(|f| {
            let start = f * spec.stride;
            window.clear();
            // channel-major, time-minor
            for ch in inputs {
                window.extend_from_slice(&ch[start..start + spec.kernel]);
            }
            ifme_wfm(manifold, &window, &w)
        })
        .collect()
}

/// Temporal wFM layer. `inputs[c][t]` is frame t of input channel c; the
/// result is indexed the same way by output channel.
pub fn temporal_wfm_forward<M: Manifold>(
    manifold: &M,
    inputs: &[Vec<M::Point>],
    spec: &TemporalWfmSpec,
    params: &WfmLayerParams,
) -> Result<Vec<Vec<M::Point>>> {
    check_inputs(inputs, spec, params)?;
    (0..spec.out_channels)
        .map(|o| temporal_channel_forward(manifold, inputs, spec, params.channel(o)))
        .collect()
}
