//! Cell decoding, validation, pruning and expansion into operator graphs.

mod cell;
mod graph;

pub use cell::{
    decode_genome, encode_genome, prune_unused_blocks, validate_cell, Block, Cell, InputRef,
    OutputBlock, PlanParams, ValidationReport, Violation,
};
pub use graph::{
    expand_network, parse_graph_text, write_graph_dot, write_graph_text, FeatureShape,
    NetworkPlan, Node, OpKind, PortRef, ResolvedGraph,
};

use crate::error::{Error, Result};

/// A concrete feature map: pyramid level, spatial side length and channels.
/// Feature maps are square by assumption.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FeatureSpec {
    pub level: u8,
    pub resolution: u32,
    pub channels: u32,
}

impl FeatureSpec {
    pub fn at_level(input_image_size: u32, level: u8, channels: u32) -> Result<FeatureSpec> {
        Ok(FeatureSpec {
            level,
            resolution: level_resolution(input_image_size, level)?,
            channels,
        })
    }
}

/// Spatial side length of a pyramid level: `input_image_size / 2^level`.
pub fn level_resolution(input_image_size: u32, level: u8) -> Result<u32> {
    let stride = 1u32
        .checked_shl(u32::from(level))
        .ok_or(Error::ImageSize { image: input_image_size, level })?;
    if input_image_size == 0 || !input_image_size.is_multiple_of(stride) {
        return Err(Error::ImageSize { image: input_image_size, level });
    }
    Ok(input_image_size / stride)
}

/// Relative order of the resize op and the 1x1 channel convolution on a
/// merge path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResizeOrder {
    /// Down-sampling: resize first, then convolve at the smaller resolution.
    ResizeThenConv,
    /// Up-sampling: convolve at the smaller resolution, then resize.
    ConvThenResize,
    /// Equal resolutions: no resize op at all.
    NoResize,
}

/// Size-dependent ordering: place the resize so the 1x1 convolution always
/// runs at the smaller of the two resolutions.
pub fn resolve_sdo_order(input_resolution: u32, target_resolution: u32) -> Result<ResizeOrder> {
    resize_ratio(input_resolution, target_resolution)?;
    Ok(if input_resolution > target_resolution {
        ResizeOrder::ResizeThenConv
    } else if input_resolution < target_resolution {
        ResizeOrder::ConvThenResize
    } else {
        ResizeOrder::NoResize
    })
}

/// Ratio of larger to smaller resolution; both must be positive and the
/// ratio a power of two. Returns 1 for equal resolutions.
pub fn resize_ratio(input_resolution: u32, target_resolution: u32) -> Result<u32> {
    let err = Err(Error::UnsupportedScale {
        from: input_resolution,
        to: target_resolution,
    });
    if input_resolution == 0 || target_resolution == 0 {
        return err;
    }
    let (hi, lo) = if input_resolution >= target_resolution {
        (input_resolution, target_resolution)
    } else {
        (target_resolution, input_resolution)
    };
    if hi % lo != 0 {
        return err;
    }
    let ratio = hi / lo;
    if !ratio.is_power_of_two() {
        return err;
    }
    Ok(ratio)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_resolutions_for_320() {
        assert_eq!(level_resolution(320, 3).unwrap(), 40);
        assert_eq!(level_resolution(320, 4).unwrap(), 20);
        assert_eq!(level_resolution(320, 5).unwrap(), 10);
        assert_eq!(level_resolution(320, 6).unwrap(), 5);
    }

    #[test]
    fn level_resolution_requires_divisibility() {
        assert!(matches!(
            level_resolution(300, 3),
            Err(Error::ImageSize { image: 300, level: 3 })
        ));
        assert!(level_resolution(0, 3).is_err());
    }

    #[test]
    fn sdo_order_cases() {
        assert_eq!(resolve_sdo_order(40, 20).unwrap(), ResizeOrder::ResizeThenConv);
        assert_eq!(resolve_sdo_order(20, 20).unwrap(), ResizeOrder::NoResize);
        assert_eq!(resolve_sdo_order(10, 40).unwrap(), ResizeOrder::ConvThenResize);
        assert_eq!(resolve_sdo_order(40, 5).unwrap(), ResizeOrder::ResizeThenConv);
    }

    #[test]
    fn sdo_rejects_non_power_of_two_ratios() {
        assert!(resolve_sdo_order(40, 15).is_err());
        assert!(resolve_sdo_order(12, 4).is_err()); // ratio 3
        assert!(resolve_sdo_order(0, 4).is_err());
    }

    #[test]
    fn sdo_total_over_power_of_two_pairs() {
        // Defined and single-valued for every power-of-two pair.
        let res = [5u32, 10, 20, 40, 80, 160, 320];
        for &a in &res {
            for &b in &res {
                let order = resolve_sdo_order(a, b).unwrap();
                match order {
                    ResizeOrder::ResizeThenConv => assert!(a > b),
                    ResizeOrder::ConvThenResize => assert!(a < b),
                    ResizeOrder::NoResize => assert_eq!(a, b),
                }
            }
        }
    }
}
