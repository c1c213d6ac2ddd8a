// SPDX-License-Identifier: Apache-2.0

pub mod collapse;
pub mod curvature;
pub mod delta_loss;
pub mod enrich;
pub mod gen_barbell;
pub mod ma;
pub mod prune;
pub mod report;
pub mod spectral;
