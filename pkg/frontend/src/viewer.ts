/** Three.js viewport: streamed building tiles, draped flood raster tiles,
 * GeoJSON overlays, and an optional basemap underlay, composited in the
 * scene's Cartesian frame (x east, y north, z up). */

import * as THREE from "three";

import { decodeTile, type DecodedTile } from "./ctb.js";
import { coverBox, lonLatToScene, mercatorToLonLat, sceneToLonLat, lonLatToMercator, tileBounds } from "./geo.js";
import { pickBuilding, pickRay } from "./picking.js";
import { selectTiles, type ViewCamera } from "./traversal.js";
import { fetchBinary, StaleDropper } from "./net.js";
import type { Api } from "./urls.js";
import type { LayerName } from "./state.js";
import type { TilesetDoc, Vec3 } from "./types.js";

export interface ViewerConfig {
  api: Api;
  basemapTemplate?: string; // e.g. https://tile.example/{z}/{x}/{y}.png
  sseThreshold?: number;
}

interface OrbitState {
  target: THREE.Vector3;
  azimuth: number; // radians, 0 = looking north
  elevation: number; // radians above horizon
  range: number;
}

const BUILDING_COLOR = 0xb8c4cf;
const PICKED_COLOR = 0xffc857;

export class TwinViewer {
  readonly renderer: THREE.WebGLRenderer;
  readonly scene = new THREE.Scene();
  readonly camera: THREE.PerspectiveCamera;
  private orbit: OrbitState;
  private tileset: TilesetDoc | null = null;
  private loaded = new Map<string, { payload: DecodedTile; object: THREE.Object3D }>();
  private visibleUris: string[] = [];
  private buildingsGroup = new THREE.Group();
  private floodGroup = new THREE.Group();
  private overlayGroups = new Map<string, THREE.Group>();
  private basemapGroup = new THREE.Group();
  private dropper = new StaleDropper();
  private floodKey = "";
  private pickedId: number | null = null;
  onPick: ((buildingId: number | null) => void) | null = null;
  onNetworkError: ((err: unknown) => void) | null = null;

  constructor(
    readonly canvas: HTMLCanvasElement,
    readonly config: ViewerConfig,
  ) {
    this.renderer = new THREE.WebGLRenderer({ canvas, antialias: true });
    this.camera = new THREE.PerspectiveCamera(60, 1, 1, 100_000);
    this.camera.up.set(0, 0, 1);
    this.scene.background = new THREE.Color(0x10151b);
    this.scene.add(new THREE.AmbientLight(0xffffff, 0.75));
    const sun = new THREE.DirectionalLight(0xffffff, 1.4);
    sun.position.set(400, -300, 600);
    this.scene.add(sun);
    this.scene.add(this.buildingsGroup, this.floodGroup, this.basemapGroup);
    this.orbit = {
      target: new THREE.Vector3(0, 0, 0),
      azimuth: -Math.PI / 4,
      elevation: Math.PI / 5,
      range: 400,
    };
    this.bindControls();
  }

  async loadTileset(doc: TilesetDoc): Promise<void> {
    this.tileset = doc;
    const b = doc.root.bbox;
    this.orbit.target.set((b[0] + b[3]) / 2, (b[1] + b[4]) / 2, (b[2] + b[5]) / 2);
    this.orbit.range = Math.max(b[3] - b[0], b[4] - b[1]) * 1.1;
    // coarse-first: the root renders immediately, refinement replaces it
    if (doc.root.content_uri && !this.loaded.has(doc.root.content_uri)) {
      try {
        const buf = await fetchBinary(this.config.api.tile(doc.root.content_uri));
        const payload = decodeTile(buf);
        this.loaded.set(doc.root.content_uri, {
          payload,
          object: this.buildTileObject(payload),
        });
      } catch (err) {
        this.onNetworkError?.(err);
      }
    }
    await this.refreshTiles();
  }

  /** Current camera in traversal form (shared formula with the server side). */
  viewCamera(): ViewCamera {
    const pos = this.cameraPosition();
    const fwd = this.orbit.target.clone().sub(pos).normalize();
    const right = new THREE.Vector3().crossVectors(fwd, new THREE.Vector3(0, 0, 1));
    if (right.lengthSq() < 1e-12) right.set(1, 0, 0);
    right.normalize();
    const up = new THREE.Vector3().crossVectors(right, fwd).normalize();
    return {
      position: pos.toArray() as Vec3,
      forward: fwd.toArray() as Vec3,
      up: up.toArray() as Vec3,
      fovY: (this.camera.fov * Math.PI) / 180,
      viewportHeight: this.canvas.clientHeight || this.canvas.height,
    };
  }

  private cameraPosition(): THREE.Vector3 {
    const { target, azimuth, elevation, range } = this.orbit;
    return new THREE.Vector3(
      target.x + range * Math.cos(elevation) * Math.sin(azimuth),
      target.y - range * Math.cos(elevation) * Math.cos(azimuth),
      target.z + range * Math.sin(elevation),
    );
  }

  async refreshTiles(): Promise<void> {
    if (!this.tileset) return;
    const wanted = selectTiles(
      this.tileset,
      this.viewCamera(),
      this.config.sseThreshold ?? 16,
    );
    this.visibleUris = wanted;
    const missing = wanted.filter((uri) => !this.loaded.has(uri));
    await Promise.all(
      missing.map(async (uri) => {
        try {
          const buf = await fetchBinary(this.config.api.tile(uri), {
            onError: (e) => this.onNetworkError?.(e),
          });
          const payload = decodeTile(buf);
          this.loaded.set(uri, { payload, object: this.buildTileObject(payload) });
        } catch (err) {
          this.onNetworkError?.(err);
        }
      }),
    );
    // Replace refinement: exactly the selected set is visible
    this.buildingsGroup.clear();
    for (const uri of this.visibleUris) {
      const entry = this.loaded.get(uri);
      if (entry) this.buildingsGroup.add(entry.object);
    }
  }

  private buildTileObject(payload: DecodedTile): THREE.Object3D {
    const geo = new THREE.BufferGeometry();
    geo.setAttribute("position", new THREE.BufferAttribute(payload.vertices, 3));
    geo.setIndex(new THREE.BufferAttribute(payload.indices, 1));
    geo.computeVertexNormals();
    const mat = new THREE.MeshLambertMaterial({ color: BUILDING_COLOR, flatShading: true });
    return new THREE.Mesh(geo, mat);
  }

  /** Fetch and drape the flood PNG tiles for one scenario (or what-if). */
  async showFlood(year: number | null, weather: string | null): Promise<void> {
    if (!this.tileset) return;
    const key = `${year}/${weather}`;
    if (key === this.floodKey) return;
    this.floodKey = key;
    const token = this.dropper.bump();
    this.floodGroup.clear();
    if (year === null || weather === null) return;
    const anchor = this.tileset.anchor;
    const b = this.tileset.root.bbox;
    const [lon0, lat0] = sceneToLonLat(anchor, b[0], b[1]);
    const [lon1, lat1] = sceneToLonLat(anchor, b[3], b[4]);
    const m0 = lonLatToMercator(lon0, lat0);
    const m1 = lonLatToMercator(lon1, lat1);
    const tiles = coverBox([m0[0], m0[1]], [m1[0], m1[1]], 16);
    const zDrape = b[2] + 0.2;
    const loader = new THREE.TextureLoader();
    await Promise.all(
      tiles.map(
        (t) =>
          new Promise<void>((resolve) => {
            loader.load(
              this.config.api.floodTile(year, weather, t.z, t.x, t.y, "png"),
              (texture) => {
                if (this.dropper.isCurrent(token)) {
                  texture.colorSpace = THREE.SRGBColorSpace;
                  this.floodGroup.add(this.drapedTile(t, texture, zDrape, 0.85));
                }
                resolve();
              },
              undefined,
              () => resolve(),
            );
          }),
      ),
    );
  }

  private drapedTile(
    t: { z: number; x: number; y: number },
    texture: THREE.Texture,
    z: number,
    opacity: number,
  ): THREE.Mesh {
    if (!this.tileset) throw new Error("tileset not loaded");
    const anchor = this.tileset.anchor;
    const [x0, yTop, span] = tileBounds(t);
    const corners: Array<[number, number]> = [
      [x0, yTop - span], // sw
      [x0 + span, yTop - span], // se
      [x0 + span, yTop], // ne
      [x0, yTop], // nw
    ].map(([mx, my]) => {
      const [lon, lat] = mercatorToLonLat(mx, my);
      return lonLatToScene(anchor, lon, lat);
    });
    const geo = new THREE.BufferGeometry();
    const pos = new Float32Array([
      corners[0][0], corners[0][1], z,
      corners[1][0], corners[1][1], z,
      corners[2][0], corners[2][1], z,
      corners[3][0], corners[3][1], z,
    ]);
    geo.setAttribute("position", new THREE.BufferAttribute(pos, 3));
    geo.setAttribute("uv", new THREE.BufferAttribute(new Float32Array([0, 0, 1, 0, 1, 1, 0, 1]), 2));
    geo.setIndex([0, 1, 2, 0, 2, 3]);
    const mat = new THREE.MeshBasicMaterial({
      map: texture,
      transparent: true,
      opacity,
      depthWrite: false,
    });
    return new THREE.Mesh(geo, mat);
  }

  /** Uniform what-if flood: a translucent water surface at the queried
   * elevation across the whole scene (depth = surface minus ground). */
  showWhatIfSurface(wseM: number | null): void {
    this.floodKey = `whatif/${wseM}`;
    this.floodGroup.clear();
    if (wseM === null || !this.tileset) return;
    const b = this.tileset.root.bbox;
    const pad = (b[3] - b[0]) * 0.25;
    const geo = new THREE.PlaneGeometry(b[3] - b[0] + 2 * pad, b[4] - b[1] + 2 * pad);
    const mat = new THREE.MeshBasicMaterial({
      color: 0x2e6fb0,
      transparent: true,
      opacity: 0.55,
      depthWrite: false,
      side: THREE.DoubleSide,
    });
    const plane = new THREE.Mesh(geo, mat);
    plane.position.set((b[0] + b[3]) / 2, (b[1] + b[4]) / 2, wseM);
    this.floodGroup.add(plane);
  }

  async showBasemap(): Promise<void> {
    if (!this.tileset || !this.config.basemapTemplate || this.basemapGroup.children.length) return;
    const anchor = this.tileset.anchor;
    const b = this.tileset.root.bbox;
    const pad = (b[3] - b[0]) * 1.5;
    const [lon0, lat0] = sceneToLonLat(anchor, b[0] - pad, b[1] - pad);
    const [lon1, lat1] = sceneToLonLat(anchor, b[3] + pad, b[4] + pad);
    const m0 = lonLatToMercator(lon0, lat0);
    const m1 = lonLatToMercator(lon1, lat1);
    const loader = new THREE.TextureLoader();
    for (const t of coverBox([m0[0], m0[1]], [m1[0], m1[1]], 16, 19)) {
      const url = this.config.basemapTemplate
        .replace("{z}", String(t.z))
        .replace("{x}", String(t.x))
        .replace("{y}", String(t.y));
      loader.load(url, (texture) => {
        texture.colorSpace = THREE.SRGBColorSpace;
        this.basemapGroup.add(this.drapedTile(t, texture, b[2] - 0.5, 1.0));
      });
    }
  }

  /** Points / lines / outline overlays from a GeoJSON layer. */
  showGeojsonLayer(name: LayerName, doc: { features: any[] } | null): void {
    let group = this.overlayGroups.get(name);
    if (!group) {
      group = new THREE.Group();
      this.overlayGroups.set(name, group);
      this.scene.add(group);
    }
    group.clear();
    if (!doc || !this.tileset) return;
    const anchor = this.tileset.anchor;
    const zBase = this.tileset.root.bbox[2];
    const colors: Record<string, number> = {
      "critical-assets": 0xff5c5c,
      roads: 0x8f9aa6,
      adaptations: 0x49d17c,
    };
    const color = colors[name] ?? 0xffffff;
    for (const feat of doc.features) {
      const geom = feat.geometry;
      if (geom.type === "Point") {
        const [x, y] = lonLatToScene(anchor, geom.coordinates[0], geom.coordinates[1]);
        const marker = new THREE.Mesh(
          new THREE.ConeGeometry(1.6, 5, 8),
          new THREE.MeshLambertMaterial({ color }),
        );
        marker.rotation.x = Math.PI / 2;
        marker.position.set(x, y, zBase + 4);
        group.add(marker);
      } else if (geom.type === "LineString" || geom.type === "Polygon") {
        const rings = geom.type === "Polygon" ? geom.coordinates : [geom.coordinates];
        for (const ring of rings) {
          const pts = ring.map(([lon, lat]: [number, number]) => {
            const [x, y] = lonLatToScene(anchor, lon, lat);
            return new THREE.Vector3(x, y, zBase + 0.6);
          });
          group.add(
            new THREE.Line(
              new THREE.BufferGeometry().setFromPoints(pts),
              new THREE.LineBasicMaterial({ color, linewidth: 2 }),
            ),
          );
        }
      }
    }
  }

  setLayerVisibility(visible: ReadonlySet<LayerName>): void {
    this.buildingsGroup.visible = visible.has("buildings3d");
    this.floodGroup.visible = visible.has("flood");
    this.basemapGroup.visible = visible.has("basemap");
    for (const [name, group] of this.overlayGroups) {
      group.visible = visible.has(name as LayerName);
    }
  }

  /** Screen-space click to building id via the shared feature tables. */
  pickAt(clientX: number, clientY: number): number | null {
    const rect = this.canvas.getBoundingClientRect();
    const ndcX = ((clientX - rect.left) / rect.width) * 2 - 1;
    const ndcY = -(((clientY - rect.top) / rect.height) * 2 - 1);
    const cam = this.viewCamera();
    const { origin, dir } = pickRay(
      { position: cam.position, forward: cam.forward, up: cam.up, fovY: cam.fovY },
      ndcX,
      ndcY,
    );
    const tiles = new Map<string, DecodedTile>();
    for (const uri of this.visibleUris) {
      const entry = this.loaded.get(uri);
      if (entry) tiles.set(uri, entry.payload);
    }
    const hit = pickBuilding(tiles, origin, dir);
    this.pickedId = hit ? hit.buildingId : null;
    return this.pickedId;
  }

  private bindControls(): void {
    let dragging = false;
    let lastX = 0;
    let lastY = 0;
    this.canvas.addEventListener("pointerdown", (e) => {
      dragging = true;
      lastX = e.clientX;
      lastY = e.clientY;
    });
    window.addEventListener("pointerup", (e) => {
      if (dragging && Math.hypot(e.clientX - lastX, e.clientY - lastY) < 3) {
        this.onPick?.(this.pickAt(e.clientX, e.clientY));
      }
      dragging = false;
    });
    window.addEventListener("pointermove", (e) => {
      if (!dragging) return;
      this.orbit.azimuth -= (e.clientX - lastX) * 0.005;
      this.orbit.elevation = Math.min(
        Math.PI / 2 - 0.05,
        Math.max(0.05, this.orbit.elevation + (e.clientY - lastY) * 0.005),
      );
      lastX = e.clientX;
      lastY = e.clientY;
      void this.refreshTiles();
    });
    this.canvas.addEventListener("wheel", (e) => {
      e.preventDefault();
      this.orbit.range = Math.min(50_000, Math.max(20, this.orbit.range * (e.deltaY > 0 ? 1.15 : 0.87)));
      void this.refreshTiles();
    });
  }

  renderLoop(): void {
    const tick = () => {
      const w = this.canvas.clientWidth || 800;
      const h = this.canvas.clientHeight || 600;
      if (this.canvas.width !== w || this.canvas.height !== h) {
        this.renderer.setSize(w, h, false);
        this.camera.aspect = w / h;
        this.camera.updateProjectionMatrix();
      }
      const pos = this.cameraPosition();
      this.camera.position.copy(pos);
      this.camera.lookAt(this.orbit.target);
      this.renderer.render(this.scene, this.camera);
      requestAnimationFrame(tick);
    };
    requestAnimationFrame(tick);
  }
}
