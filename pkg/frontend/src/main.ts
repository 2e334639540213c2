import { Dashboard, type DashboardConfig } from "./app.js";

declare global {
  interface Window {
    dashboardConfig?: Partial<DashboardConfig>;
  }
}

const config: DashboardConfig = {
  serverBase: window.dashboardConfig?.serverBase ?? "",
  basemapTemplate: window.dashboardConfig?.basemapTemplate,
};

new Dashboard(config).start().catch((err) => {
  console.error("dashboard failed to start", err);
  const banner = document.getElementById("banner");
  if (banner) {
    banner.textContent = `failed to start: ${err}`;
    banner.style.display = "block";
  }
});
