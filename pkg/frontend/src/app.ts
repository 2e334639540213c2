/** Dashboard shell: pages (home, viewer), scenario sliders, layer toggles,
 * the feature detail panel, summary charts, the what-if panel, and the
 * guided tour, all reacting to one ViewerState. */

import { chartData, drawBarChart, drawRoadGauge } from "./charts.js";
import { featurePanelModel } from "./feature.js";
import { fetchJson, StaleDropper } from "./net.js";
import {
  initialState,
  LAYERS,
  pickFeature,
  setScenario,
  setWhatIf,
  toggleLayer,
  type LayerName,
  type ViewerState,
} from "./state.js";
import { GuidedTour } from "./tour.js";
import { Api } from "./urls.js";
import { TwinViewer } from "./viewer.js";
import { PRESET_FEET, validateFeetInput, wseParamForFeet } from "./whatif.js";
import type { FeatureDoc, ScenarioDoc, SummaryDoc, TilesetDoc, WhatIfDoc } from "./types.js";

export interface DashboardConfig {
  serverBase: string;
  basemapTemplate?: string;
}

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

export class Dashboard {
  private api: Api;
  private state!: ViewerState;
  private scenarios!: ScenarioDoc;
  private viewer!: TwinViewer;
  private dropper = new StaleDropper();
  private hiddenCategories = new Set<string>();
  private lastSummary: SummaryDoc | null = null;

  constructor(private config: DashboardConfig) {
    this.api = new Api(config.serverBase);
  }

  async start(): Promise<void> {
    window.addEventListener("hashchange", () => this.route());
    this.route();
    this.scenarios = await fetchJson<ScenarioDoc>(this.api.scenarios(), {
      onError: () => this.banner("server unreachable, retrying"),
    });
    this.viewer = new TwinViewer(el<HTMLCanvasElement>("viewport"), {
      api: this.api,
      basemapTemplate: this.config.basemapTemplate,
    });
    this.viewer.onNetworkError = () => this.banner("fetch failed, retrying");
    this.state = initialState(this.scenarios, this.viewer.viewCamera() as never);
    this.buildSliders();
    this.buildLayerToggles();
    this.buildWhatIfPanel();
    this.viewer.onPick = (id) => void this.applyPick(id);

    const tileset = await fetchJson<TilesetDoc>(this.api.tileset());
    await this.viewer.loadTileset(tileset);
    await this.loadOverlays();
    this.viewer.renderLoop();
    await this.applyScenario(this.state.selectedYear, this.state.selectedWeather);
    this.startTour();
  }

  private route(): void {
    const page = location.hash === "#home" ? "home" : "viewer";
    el("page-home").style.display = page === "home" ? "block" : "none";
    el("page-viewer").style.display = page === "viewer" ? "block" : "none";
  }

  private banner(text: string): void {
    const b = el("banner");
    b.textContent = text;
    b.style.display = "block";
    window.setTimeout(() => (b.style.display = "none"), 4000);
  }

  private buildSliders(): void {
    const yearInput = el<HTMLInputElement>("year-slider");
    const weatherInput = el<HTMLInputElement>("weather-slider");
    yearInput.max = String(this.scenarios.time_horizons.length - 1);
    weatherInput.max = String(this.scenarios.weather_conditions.length - 1);
    const onChange = () => {
      const year = this.scenarios.time_horizons[Number(yearInput.value)];
      const weather = this.scenarios.weather_conditions[Number(weatherInput.value)];
      void this.applyScenario(year, weather);
    };
    yearInput.addEventListener("input", onChange);
    weatherInput.addEventListener("input", onChange);
  }

  private buildLayerToggles(): void {
    const box = el("layer-toggles");
    for (const layer of LAYERS) {
      const label = document.createElement("label");
      const input = document.createElement("input");
      input.type = "checkbox";
      input.checked = this.state.visibleLayers.has(layer);
      input.addEventListener("change", () => {
        this.state = toggleLayer(this.state, layer);
        this.viewer.setLayerVisibility(this.state.visibleLayers);
        // flood tiles are fetched only while the layer is on; re-drape on re-enable
        if (layer === "flood" && this.state.visibleLayers.has("flood") && this.state.whatifWse === null) {
          void this.viewer.showFlood(this.state.selectedYear, this.state.selectedWeather);
        }
      });
      label.append(input, ` ${layer}`);
      box.append(label);
    }
    this.viewer.setLayerVisibility(this.state.visibleLayers);
  }

  private buildWhatIfPanel(): void {
    const input = el<HTMLInputElement>("whatif-feet");
    const error = el("whatif-error");
    const go = () => {
      const check = validateFeetInput(input.value);
      if (!check.ok) {
        error.textContent = check.error ?? "invalid input";
        return;
      }
      error.textContent = "";
      void this.applyWhatIf(check.wseM!);
    };
    el("whatif-run").addEventListener("click", go);
    for (const feet of PRESET_FEET) {
      const btn = document.createElement("button");
      btn.textContent = `${feet} ft`;
      btn.addEventListener("click", () => {
        input.value = String(feet);
        void this.applyWhatIf(Number(wseParamForFeet(feet)));
      });
      el("whatif-presets").append(btn);
    }
    el("whatif-clear").addEventListener("click", () => {
      this.state = setWhatIf(this.state, null);
      void this.applyScenario(this.state.selectedYear, this.state.selectedWeather);
    });
  }

  private async loadOverlays(): Promise<void> {
    for (const layer of ["critical-assets", "roads", "adaptations"] as LayerName[]) {
      try {
        const doc = await fetchJson<{ features: unknown[] }>(this.api.layer(layer));
        this.viewer.showGeojsonLayer(layer, doc as never);
      } catch {
        this.banner(`failed to load ${layer}`);
      }
    }
    await this.viewer.showBasemap();
    this.viewer.setLayerVisibility(this.state.visibleLayers);
  }

  private async applyScenario(year: number, weather: string): Promise<void> {
    this.state = setScenario(this.state, this.scenarios, year, weather);
    const token = this.dropper.bump();
    el("scenario-label").textContent = `${year} - ${weather}`;
    const summary = await fetchJson<SummaryDoc>(this.api.summary(year, weather), {
      onError: () => this.banner("summary fetch failed, retrying"),
    });
    if (!this.dropper.isCurrent(token)) return; // superseded while in flight
    this.renderSummary(summary);
    if (this.state.visibleLayers.has("flood")) {
      await this.viewer.showFlood(year, weather);
    }
  }

  private async applyWhatIf(wseM: number): Promise<void> {
    this.state = setWhatIf(this.state, wseM);
    const token = this.dropper.bump();
    el("scenario-label").textContent = `what-if ${wseM.toFixed(4)} m`;
    const doc = await fetchJson<WhatIfDoc>(this.api.whatif(wseM));
    if (!this.dropper.isCurrent(token)) return;
    this.renderSummary(doc.summary);
    this.viewer.showWhatIfSurface(doc.wse_m); // uniform water surface, no raster tiles
  }

  private renderSummary(summary: SummaryDoc): void {
    this.lastSummary = summary;
    const data = chartData(summary, this.hiddenCategories);
    const bars = el<HTMLCanvasElement>("chart-bars");
    const gauge = el<HTMLCanvasElement>("chart-gauge");
    drawBarChart(bars.getContext("2d")!, data);
    drawRoadGauge(gauge.getContext("2d")!, data.roadPct);
    const nav = el("category-nav");
    nav.innerHTML = "";
    for (const c of summary.categories) {
      const btn = document.createElement("button");
      btn.textContent = c.name;
      btn.classList.toggle("off", this.hiddenCategories.has(c.name));
      btn.addEventListener("click", () => {
        if (this.hiddenCategories.has(c.name)) this.hiddenCategories.delete(c.name);
        else this.hiddenCategories.add(c.name);
        this.renderSummary(this.lastSummary!);
      });
      nav.append(btn);
    }
  }

  private async applyPick(buildingId: number | null): Promise<void> {
    this.state = pickFeature(this.state, buildingId);
    const panel = el("feature-panel");
    if (buildingId === null) {
      panel.style.display = "none";
      return;
    }
    const doc = await fetchJson<FeatureDoc>(this.api.feature(buildingId));
    const model = featurePanelModel(doc);
    panel.style.display = "block";
    el("feature-title").textContent = model.title;
    el("feature-meta").textContent = model.meta;
    const tbody = el("feature-depths");
    tbody.innerHTML = "";
    for (const row of model.rows) {
      const tr = document.createElement("tr");
      tr.innerHTML = `<td>${row.year}</td><td>${row.weather}</td><td>${row.depthLabel}</td>`;
      tbody.append(tr);
    }
    el("feature-close").onclick = () => void this.applyPick(null);
  }

  private startTour(): void {
    const tour = new GuidedTour(window.localStorage);
    const overlay = el("tour-overlay");
    const show = (step: ReturnType<GuidedTour["start"]>) => {
      if (!step) {
        overlay.style.display = "none";
        return;
      }
      overlay.style.display = "block";
      el("tour-title").textContent = step.title;
      el("tour-body").textContent = step.body;
      document.querySelectorAll(".tour-target").forEach((n) => n.classList.remove("tour-target"));
      document.querySelector(step.target)?.classList.add("tour-target");
    };
    show(tour.start());
    el("tour-next").onclick = () => show(tour.next());
    el("tour-skip").onclick = () => {
      tour.dismiss();
      show(null);
    };
  }
}
