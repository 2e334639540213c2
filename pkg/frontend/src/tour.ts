/** First-visit guided tour with a persisted "seen" flag. */

export interface TourStep {
  id: string;
  target: string; // CSS selector of the highlighted control
  title: string;
  body: string;
}

export const TOUR_STEPS: TourStep[] = [
  {
    id: "welcome",
    target: "#viewport",
    title: "The digital twin",
    body: "Every building on the map is a 3D model streamed from the scene server. Drag to look around, scroll to zoom.",
  },
  {
    id: "sliders",
    target: "#scenario-sliders",
    title: "Flood scenarios",
    body: "The horizontal slider moves through time; the vertical one picks a weather condition. Together they cover every scenario in the assessment.",
  },
  {
    id: "layers",
    target: "#layer-toggles",
    title: "Map layers",
    body: "Toggle flood depths, critical assets, roads, the adaptation projects overlay, and the basemap independently.",
  },
  {
    id: "picking",
    target: "#viewport",
    title: "Inspect a building",
    body: "Click any building to see its attributes and how deep the water gets under every scenario.",
  },
  {
    id: "charts",
    target: "#charts",
    title: "Community impact",
    body: "The bars compare affected versus total assets per category; the gauge tracks the share of roads that flood.",
  },
  {
    id: "whatif",
    target: "#whatif-panel",
    title: "What-if water levels",
    body: "Type a water level in feet (or use the 7 ft / 11 ft presets) to compute a fresh assessment on the spot.",
  },
];

export interface KeyValueStorage {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
}

const SEEN_KEY = "coastaltwin.tour.seen";

export class GuidedTour {
  private index = 0;

  constructor(
    private readonly storage: KeyValueStorage,
    readonly steps: TourStep[] = TOUR_STEPS,
  ) {}

  seen(): boolean {
    return this.storage.getItem(SEEN_KEY) === "1";
  }

  /** Step to show on load: the first one on a first visit, none afterwards. */
  start(): TourStep | null {
    if (this.seen()) return null;
    this.index = 0;
    return this.steps[0];
  }

  next(): TourStep | null {
    this.index += 1;
    if (this.index >= this.steps.length) {
      this.dismiss();
      return null;
    }
    return this.steps[this.index];
  }

  dismiss(): void {
    this.storage.setItem(SEEN_KEY, "1");
  }

  current(): TourStep {
    return this.steps[this.index];
  }
}
