//! Facet statistics over a category extension.
//!
//! The extension of a category is the list of its items inside the current
//! bounding box. For every facet we count how often each value occurs among
//! the items where the facet is specified, then derive:
//!
//! * the Shannon entropy (bits) of that value distribution, ignoring items
//!   where the facet is missing;
//! * the mean cardinality, i.e. specified items per distinct value;
//! * the exploration cost, entropy divided by mean cardinality (lower is
//!   better);
//! * a navigation-quality baseline, the product of balance, an object
//!   cardinality penalty and frequency (higher is better).
//!
//! Ranking drops rarely specified facets and facets with zero cost, sorts by
//! increasing cost and truncates the list.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::geo::GeoItem;

#[derive(Debug, Clone, PartialEq)]
pub enum AnalyticsError {
    ZeroCount { value: String },
    SpecifiedExceedsTotal { specified: u64, total: u64 },
    InvalidSigma(f64),
    InvalidMu(f64),
    InvalidMinCoverage(f64),
    ZeroMaxFacets,
}

impl fmt::Display for AnalyticsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AnalyticsError::ZeroCount { value } => write!(f, "value {value:?} has a zero count"),
            AnalyticsError::SpecifiedExceedsTotal { specified, total } => write!(
                f,
                "{specified} items specify the facet but the category only has {total}"
            ),
            AnalyticsError::InvalidSigma(s) => write!(f, "sigma must be finite and > 0, got {s}"),
            AnalyticsError::InvalidMu(m) => write!(f, "mu must be finite, got {m}"),
            AnalyticsError::InvalidMinCoverage(c) => {
                write!(f, "min_coverage must lie in [0, 1], got {c}")
            }
            AnalyticsError::ZeroMaxFacets => f.write_str("max_facets must be at least 1"),
        }
    }
}

impl core::error::Error for AnalyticsError {}

/// Value counts of one facet over one category extension.
///
/// Items lacking the facet are not stored as a value; their number is
/// `category_total - specified_count`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValueHistogram {
    facet_key: String,
    counts: BTreeMap<String, u64>,
    specified_count: u64,
    category_total: u64,
}

impl ValueHistogram {
    pub fn from_counts(
        facet_key: impl Into<String>,
        counts: BTreeMap<String, u64>,
        category_total: u64,
    ) -> Result<Self, AnalyticsError> {
        if let Some((value, _)) = counts.iter().find(|(_, &c)| c == 0) {
            return Err(AnalyticsError::ZeroCount {
                value: value.clone(),
            });
        }
        let specified_count = counts.values().sum();
        if specified_count > category_total {
            return Err(AnalyticsError::SpecifiedExceedsTotal {
                specified: specified_count,
                total: category_total,
            });
        }
        Ok(ValueHistogram {
            facet_key: facet_key.into(),
            counts,
            specified_count,
            category_total,
        })
    }

    pub fn facet_key(&self) -> &str {
        &self.facet_key
    }

    pub fn counts(&self) -> &BTreeMap<String, u64> {
        &self.counts
    }

    pub fn specified_count(&self) -> u64 {
        self.specified_count
    }

    pub fn category_total(&self) -> u64 {
        self.category_total
    }

    pub fn not_specified_count(&self) -> u64 {
        self.category_total - self.specified_count
    }

    /// Number of distinct specified values.
    pub fn distinct_values(&self) -> usize {
        self.counts.len()
    }

    pub fn coverage(&self) -> f64 {
        if self.category_total == 0 {
            0.0
        } else {
            self.specified_count as f64 / self.category_total as f64
        }
    }

    /// Values sorted by count descending, ties by value ascending.
    pub fn sorted_values(&self) -> Vec<ValueEntry> {
        let mut values: Vec<ValueEntry> = self
            .counts
            .iter()
            .map(|(value, &count)| ValueEntry {
                value: value.clone(),
                count,
            })
            .collect();
        values.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.value.cmp(&b.value)));
        values
    }
}

/// Counts the values of `facet_key` over `items`, which must all belong to
/// one category. `category_total` is `items.len()`.
pub fn build_histogram(items: &[GeoItem], facet_key: &str) -> ValueHistogram {
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    for value in items.iter().filter_map(|item| item.facet(facet_key)) {
        *counts.entry(String::from(value)).or_default() += 1;
    }
    let specified_count = counts.values().sum();
    ValueHistogram {
        facet_key: String::from(facet_key),
        counts,
        specified_count,
        category_total: items.len() as u64,
    }
}

/// Every facet key used by at least one item, in key order.
pub fn facet_keys(items: &[GeoItem]) -> BTreeSet<&str> {
    items
        .iter()
        .flat_map(|item| item.facets.keys().map(String::as_str))
        .collect()
}

/// Entropy in bits of the specified-value distribution. `0 * log 0 = 0`.
pub fn entropy_bits(h: &ValueHistogram) -> f64 {
    if h.specified_count == 0 || h.counts.len() == 1 {
        return 0.0;
    }
    let total = h.specified_count as f64;
    let sum: f64 = h
        .counts
        .values()
        .map(|&c| {
            let p = c as f64 / total;
            p * libm::log2(p)
        })
        .sum();
    // -0.0 never leaks out.
    if sum == 0.0 {
        0.0
    } else {
        -sum
    }
}

/// Specified items per distinct value; `None` when no value is specified.
///
/// The numerator is the number of items where the facet is specified, not
/// the whole category extension.
pub fn mean_cardinality(h: &ValueHistogram) -> Option<f64> {
    match h.counts.len() {
        0 => None,
        m => Some(h.specified_count as f64 / m as f64),
    }
}

/// Entropy over mean cardinality; `None` when no value is specified.
pub fn exploration_cost(h: &ValueHistogram) -> Option<f64> {
    mean_cardinality(h).map(|mean_card| entropy_bits(h) / mean_card)
}

/// Parameters of the Gaussian object-cardinality penalty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NavigationQualityParams {
    pub mu: f64,
    pub sigma: f64,
    /// Count the missing-facet bucket as one more value when the facet does
    /// not cover the whole extension.
    pub count_not_specified_as_value: bool,
}

impl Default for NavigationQualityParams {
    fn default() -> Self {
        NavigationQualityParams {
            mu: 2.0,
            sigma: 4.9,
            count_not_specified_as_value: true,
        }
    }
}

impl NavigationQualityParams {
    pub fn new(mu: f64, sigma: f64) -> Result<Self, AnalyticsError> {
        let params = NavigationQualityParams {
            mu,
            sigma,
            ..Default::default()
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), AnalyticsError> {
        if !self.mu.is_finite() {
            return Err(AnalyticsError::InvalidMu(self.mu));
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(AnalyticsError::InvalidSigma(self.sigma));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NavigationBreakdown {
    pub balance: f64,
    pub cardinality: f64,
    pub frequency: f64,
    pub quality: f64,
}

/// `1 - sum(|count - mean|) / (2 * specified)`; 1 exactly when all counts
/// are equal. `None` for an empty histogram.
pub fn balance(h: &ValueHistogram) -> Option<f64> {
    let m = h.counts.len();
    if m == 0 {
        return None;
    }
    let total = h.specified_count as f64;
    let mean = total / m as f64;
    let deviation: f64 = h
        .counts
        .values()
        .map(|&c| libm::fabs(c as f64 - mean))
        .sum();
    Some(1.0 - deviation / (2.0 * total))
}

/// Gaussian penalty on the number of values a facet shows.
pub fn cardinality_metric(values_shown: usize, params: &NavigationQualityParams) -> f64 {
    let d = values_shown as f64 - params.mu;
    libm::exp(-(d * d) / (2.0 * params.sigma * params.sigma))
}

/// Product of balance, object cardinality and frequency.
pub fn navigation_quality(
    h: &ValueHistogram,
    params: &NavigationQualityParams,
) -> Option<NavigationBreakdown> {
    let balance = balance(h)?;
    let frequency = h.coverage();
    let mut shown = h.counts.len();
    if params.count_not_specified_as_value && h.specified_count < h.category_total {
        shown += 1;
    }
    let cardinality = cardinality_metric(shown, params);
    Some(NavigationBreakdown {
        balance,
        cardinality,
        frequency,
        quality: balance * cardinality * frequency,
    })
}

/// All statistics of one facet.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FacetStats {
    pub facet_key: String,
    pub distinct_values: usize,
    pub specified_count: u64,
    pub category_total: u64,
    pub coverage: f64,
    pub entropy_bits: f64,
    pub mean_cardinality: f64,
    pub exploration_cost: f64,
    pub navigation_quality: f64,
    pub navigation: NavigationBreakdown,
}

/// `None` for a facet with no specified value.
pub fn facet_stats(h: &ValueHistogram, params: &NavigationQualityParams) -> Option<FacetStats> {
    let mean_cardinality = mean_cardinality(h)?;
    let entropy = entropy_bits(h);
    let navigation = navigation_quality(h, params)?;
    Some(FacetStats {
        facet_key: h.facet_key.clone(),
        distinct_values: h.counts.len(),
        specified_count: h.specified_count,
        category_total: h.category_total,
        coverage: h.coverage(),
        entropy_bits: entropy,
        mean_cardinality,
        exploration_cost: entropy / mean_cardinality,
        navigation_quality: navigation.quality,
        navigation,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankingConfig {
    pub min_coverage: f64,
    pub max_facets: usize,
    pub max_values_shown: usize,
    pub navigation: NavigationQualityParams,
}

impl Default for RankingConfig {
    fn default() -> Self {
        RankingConfig {
            min_coverage: 0.03,
            max_facets: 12,
            max_values_shown: 8,
            navigation: NavigationQualityParams::default(),
        }
    }
}

impl RankingConfig {
    pub fn validate(&self) -> Result<(), AnalyticsError> {
        if !(0.0..=1.0).contains(&self.min_coverage) {
            return Err(AnalyticsError::InvalidMinCoverage(self.min_coverage));
        }
        if self.max_facets == 0 {
            return Err(AnalyticsError::ZeroMaxFacets);
        }
        self.navigation.validate()
    }
}

/// Cost ascending, then coverage descending, then facet key ascending.
pub fn ranking_order(a: &FacetStats, b: &FacetStats) -> Ordering {
    a.exploration_cost
        .total_cmp(&b.exploration_cost)
        .then_with(|| b.coverage.total_cmp(&a.coverage))
        .then_with(|| a.facet_key.cmp(&b.facet_key))
}

/// Statistics of every facet of `items`, unfiltered, in ranking order.
pub fn all_facet_stats(items: &[GeoItem], params: &NavigationQualityParams) -> Vec<FacetStats> {
    let histograms: Vec<ValueHistogram> = facet_keys(items)
        .into_iter()
        .map(|key| build_histogram(items, key))
        .collect();
    let mut stats: Vec<FacetStats> = histograms
        .iter()
        .filter_map(|h| facet_stats(h, params))
        .collect();
    stats.sort_by(ranking_order);
    stats
}

/// Ranks already built histograms. See [`rank_facets`].
pub fn rank_histograms<'a, I>(histograms: I, cfg: &RankingConfig) -> Vec<FacetStats>
where
    I: IntoIterator<Item = &'a ValueHistogram>,
{
    let mut ranked: Vec<FacetStats> = histograms
        .into_iter()
        .filter(|h| h.coverage() >= cfg.min_coverage)
        .filter_map(|h| facet_stats(h, &cfg.navigation))
        .filter(|s| s.exploration_cost > 0.0)
        .collect();
    ranked.sort_by(ranking_order);
    ranked.truncate(cfg.max_facets);
    ranked
}

/// Facets of one category extension worth proposing, best first.
///
/// Facets specified in fewer than `min_coverage` of the items are dropped,
/// as are facets whose cost is zero (a single value everywhere). The rest is
/// sorted by increasing exploration cost and cut at `max_facets`.
pub fn rank_facets(items: &[GeoItem], cfg: &RankingConfig) -> Vec<FacetStats> {
    let histograms: Vec<ValueHistogram> = facet_keys(items)
        .into_iter()
        .map(|key| build_histogram(items, key))
        .collect();
    rank_histograms(&histograms, cfg)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValueEntry {
    pub value: String,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FacetEntry {
    pub facet_key: String,
    pub values: Vec<ValueEntry>,
    pub hidden_tail: Vec<ValueEntry>,
    pub not_specified_count: u64,
}

/// Data behind a category widget, whatever its layout.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WidgetPayload {
    pub category_id: String,
    pub facets: Vec<FacetEntry>,
}

pub fn build_widget_payload(
    category_id: &str,
    items: &[GeoItem],
    ranking: &[FacetStats],
    cfg: &RankingConfig,
) -> WidgetPayload {
    let facets = ranking
        .iter()
        .map(|stats| {
            let h = build_histogram(items, &stats.facet_key);
            let mut values = h.sorted_values();
            let hidden_tail = values.split_off(values.len().min(cfg.max_values_shown));
            FacetEntry {
                facet_key: stats.facet_key.clone(),
                values,
                hidden_tail,
                not_specified_count: h.not_specified_count(),
            }
        })
        .collect();
    WidgetPayload {
        category_id: String::from(category_id),
        facets,
    }
}
