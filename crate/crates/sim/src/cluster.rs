//! Cluster membership, capability registration and the ground-truth
//! resource state of every node.
//!
//! Capability descriptors are configured capacity bounds, static over a
//! node's active lifetime; the ground truth tracks what is actually free
//! right now. The scheduler never reads the ground truth directly.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::orbital::{LinkClass, Regime};

/// Per-node schedulable resource kinds tracked by truth, reports and views.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResourceKind {
    /// Equivalent data processing throughput, GB/s.
    Compute,
    /// Free storage, GB.
    Storage,
    /// Free sensing slots (a node images one scene at a time per slot).
    SensorSlots,
}

pub const RESOURCE_KINDS: [ResourceKind; 3] = [
    ResourceKind::Compute,
    ResourceKind::Storage,
    ResourceKind::SensorSlots,
];

impl fmt::Display for ResourceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ResourceKind::Compute => write!(f, "compute"),
            ResourceKind::Storage => write!(f, "storage"),
            ResourceKind::SensorSlots => write!(f, "sensor_slots"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapabilityDescriptor {
    pub node_id: u32,
    pub regime: Regime,
    /// GB/s of equivalent processing throughput.
    pub compute_capacity: f64,
    /// GB.
    pub storage_capacity: f64,
    pub sensor_slots: u32,
    pub link_classes: BTreeSet<LinkClass>,
    pub sensor_types: BTreeSet<String>,
}

impl CapabilityDescriptor {
    pub fn bound(&self, resource: ResourceKind) -> f64 {
        match resource {
            ResourceKind::Compute => self.compute_capacity,
            ResourceKind::Storage => self.storage_capacity,
            ResourceKind::SensorSlots => self.sensor_slots as f64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LifecycleState {
    Registering,
    Active,
    Degraded,
    Departed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MembershipRecord {
    pub node_id: u32,
    pub state: LifecycleState,
    pub last_contact_s: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum ClusterError {
    #[error("node {0} already registered with a conflicting descriptor")]
    ConflictingDescriptor(u32),
    #[error("unknown node {0}")]
    UnknownNode(u32),
    #[error("illegal lifecycle transition for node {node}: {from:?} -> {to:?}")]
    IllegalTransition {
        node: u32,
        from: LifecycleState,
        to: LifecycleState,
    },
    #[error("capacity distribution requires at least one node")]
    NoNodes,
    #[error(
        "resource bound violated on node {node} ({resource}): delta {delta} on {available} free of {bound}"
    )]
    BoundViolation {
        node: u32,
        resource: ResourceKind,
        delta: f64,
        available: f64,
        bound: f64,
    },
    #[error("time went backwards: {t} before state time {as_of}")]
    TimeRegression { t: f64, as_of: f64 },
}

/// Capability registry plus membership lifecycle, immutable after setup
/// except for lifecycle transitions.
#[derive(Debug, Clone, Default)]
pub struct Registry {
    descriptors: BTreeMap<u32, CapabilityDescriptor>,
    members: BTreeMap<u32, MembershipRecord>,
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a node in `registering` state. Retrying with an identical
    /// descriptor is a no-op; a conflicting descriptor is rejected.
    pub fn register_node(
        &mut self,
        descriptor: CapabilityDescriptor,
        t: f64,
    ) -> Result<MembershipRecord, ClusterError> {
        let id = descriptor.node_id;
        if let Some(existing) = self.descriptors.get(&id) {
            if *existing != descriptor {
                return Err(ClusterError::ConflictingDescriptor(id));
            }
            return Ok(self.members[&id].clone());
        }
        self.descriptors.insert(id, descriptor);
        let record = MembershipRecord {
            node_id: id,
            state: LifecycleState::Registering,
            last_contact_s: t,
        };
        self.members.insert(id, record.clone());
        Ok(record)
    }

    pub fn transition(
        &mut self,
        node: u32,
        to: LifecycleState,
        t: f64,
    ) -> Result<(), ClusterError> {
        let record = self
            .members
            .get_mut(&node)
            .ok_or(ClusterError::UnknownNode(node))?;
        let legal = matches!(
            (record.state, to),
            (LifecycleState::Registering, LifecycleState::Active)
                | (LifecycleState::Active, LifecycleState::Degraded)
                | (LifecycleState::Degraded, LifecycleState::Active)
                | (LifecycleState::Active, LifecycleState::Departed)
                | (LifecycleState::Degraded, LifecycleState::Departed)
        );
        if !legal {
            return Err(ClusterError::IllegalTransition {
                node,
                from: record.state,
                to,
            });
        }
        record.state = to;
        record.last_contact_s = t;
        Ok(())
    }

    pub fn touch(&mut self, node: u32, t: f64) {
        if let Some(r) = self.members.get_mut(&node) {
            r.last_contact_s = t;
        }
    }

    pub fn descriptor(&self, node: u32) -> Option<&CapabilityDescriptor> {
        self.descriptors.get(&node)
    }

    pub fn member(&self, node: u32) -> Option<&MembershipRecord> {
        self.members.get(&node)
    }

    pub fn len(&self) -> usize {
        self.descriptors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.descriptors.is_empty()
    }

    pub fn descriptors(&self) -> impl Iterator<Item = &CapabilityDescriptor> {
        self.descriptors.values()
    }

    /// A node is schedulable unless it has departed.
    pub fn schedulable(&self, node: u32) -> bool {
        self.members
            .get(&node)
            .map(|r| r.state != LifecycleState::Departed)
            .unwrap_or(false)
    }

    pub fn export_csv(&self) -> String {
        let mut out = String::from("node_id,regime,compute_gbps,storage_gb,link_classes\n");
        for d in self.descriptors.values() {
            let classes: Vec<String> = d.link_classes.iter().map(|c| c.to_string()).collect();
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                d.node_id,
                d.regime,
                d.compute_capacity,
                d.storage_capacity,
                classes.join("|")
            ));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistributionPolicy {
    Uniform,
    /// 80% of the capacity on the first 20% of nodes.
    Pareto,
}

/// Splits a total compute capacity across nodes. Assignments sum to the
/// total within floating-point round-off.
pub fn distribute_capacity(
    total_gbps: f64,
    node_ids: &[u32],
    policy: DistributionPolicy,
) -> Result<Vec<(u32, f64)>, ClusterError> {
    if node_ids.is_empty() {
        return Err(ClusterError::NoNodes);
    }
    assert!(total_gbps > 0.0);
    let n = node_ids.len();
    match policy {
        DistributionPolicy::Uniform => {
            let share = total_gbps / n as f64;
            Ok(node_ids.iter().map(|&id| (id, share)).collect())
        }
        DistributionPolicy::Pareto => {
            let heavy = (n as f64 * 0.2).ceil().max(1.0) as usize;
            let heavy = heavy.min(n);
            let light = n - heavy;
            let heavy_share = if light == 0 {
                total_gbps / heavy as f64
            } else {
                total_gbps * 0.8 / heavy as f64
            };
            let light_share = if light == 0 {
                0.0
            } else {
                total_gbps * 0.2 / light as f64
            };
            Ok(node_ids
                .iter()
                .enumerate()
                .map(|(i, &id)| (id, if i < heavy { heavy_share } else { light_share }))
                .collect())
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct NodeTruth {
    free: BTreeMap<ResourceKind, f64>,
}

/// The actual per-node resource state, owned by one engine instance and
/// mutated only through `apply_resource_delta`.
#[derive(Debug, Clone)]
pub struct GroundTruthState {
    nodes: BTreeMap<u32, NodeTruth>,
    bounds: BTreeMap<u32, BTreeMap<ResourceKind, f64>>,
    pub as_of_s: f64,
}

impl GroundTruthState {
    pub fn from_registry(registry: &Registry) -> Self {
        let mut nodes = BTreeMap::new();
        let mut bounds = BTreeMap::new();
        for d in registry.descriptors() {
            let mut free = BTreeMap::new();
            let mut bound = BTreeMap::new();
            for kind in RESOURCE_KINDS {
                free.insert(kind, d.bound(kind));
                bound.insert(kind, d.bound(kind));
            }
            nodes.insert(d.node_id, NodeTruth { free });
            bounds.insert(d.node_id, bound);
        }
        Self {
            nodes,
            bounds,
            as_of_s: 0.0,
        }
    }

    pub fn free(&self, node: u32, resource: ResourceKind) -> f64 {
        self.nodes
            .get(&node)
            .map(|n| n.free[&resource])
            .unwrap_or(0.0)
    }

    pub fn bound(&self, node: u32, resource: ResourceKind) -> f64 {
        self.bounds
            .get(&node)
            .map(|b| b[&resource])
            .unwrap_or(0.0)
    }

    pub fn node_ids(&self) -> impl Iterator<Item = u32> + '_ {
        self.nodes.keys().copied()
    }

    /// Adjusts a resource by `delta` (negative consumes, positive releases).
    /// Fails without mutating on bound violations; tolerates round-off at
    /// the boundaries.
    pub fn apply_resource_delta(
        &mut self,
        node: u32,
        resource: ResourceKind,
        delta: f64,
        t: f64,
    ) -> Result<(), ClusterError> {
        if t < self.as_of_s {
            return Err(ClusterError::TimeRegression {
                t,
                as_of: self.as_of_s,
            });
        }
        let bound = self.bound(node, resource);
        let truth = self
            .nodes
            .get_mut(&node)
            .ok_or(ClusterError::UnknownNode(node))?;
        let free = truth.free.get_mut(&resource).unwrap();
        let next = *free + delta;
        let eps = 1e-9 * bound.max(1.0);
        if next < -eps || next > bound + eps {
            return Err(ClusterError::BoundViolation {
                node,
                resource,
                delta,
                available: *free,
                bound,
            });
        }
        *free = next.clamp(0.0, bound);
        self.as_of_s = t;
        Ok(())
    }
}
