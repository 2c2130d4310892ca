import { ApiClient } from './api.js';
import { App } from './app.js';

interface DeployConfig {
  apiBaseUrl: string;
  pollIntervalMs?: number;
}

async function loadConfig(): Promise<DeployConfig> {
  const response = await fetch('./config.json');
  if (!response.ok) {
    throw new Error(`config.json missing (${response.status})`);
  }
  return (await response.json()) as DeployConfig;
}

async function boot(): Promise<void> {
  const root = document.getElementById('app');
  if (root === null) {
    throw new Error('no #app element');
  }
  let config: DeployConfig;
  try {
    config = await loadConfig();
  } catch (error) {
    root.textContent = `cannot load deployment config: ${String(error)}`;
    return;
  }
  const app = new App(root, new ApiClient(config.apiBaseUrl), {
    pollIntervalMs: config.pollIntervalMs ?? 500,
  });
  await app.init();
}

void boot();
