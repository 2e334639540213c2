/** Pure view-model for the picked-feature detail panel. */

import type { FeatureDoc } from "./types.js";

export interface FeaturePanelModel {
  title: string;
  meta: string;
  tags: string[];
  rows: Array<{ year: number; weather: string; depthLabel: string }>;
}

export function featurePanelModel(doc: FeatureDoc): FeaturePanelModel {
  return {
    title: `Building ${doc.id}`,
    meta:
      `${doc.attributes.municipality}, ${doc.attributes.county} - ` +
      `base ${doc.base_elevation.toFixed(2)} m, roof +${doc.roof_height.toFixed(2)} m`,
    tags: doc.attributes.hazard_tags,
    rows: doc.depths.map((d) => ({
      year: d.year,
      weather: d.weather,
      depthLabel: `${d.max_depth.toFixed(2)} m`,
    })),
  };
}
