/** Browser bootstrap: wires the three panels to a live API.
 *
 * Query parameters: ?api=<base url>&class=<id>&learner=<id>&token=<bearer>
 */

import { ApiClient, ApiRequestError } from "./api.js";
import { renderClassOverview, renderErrorBanner } from "./classOverview.js";
import { LearnerView, renderLearnerView } from "./learnerView.js";
import { RecommendationQueue, renderQueueCard } from "./queue.js";
import { initialViewState } from "./state.js";
import type { Decision } from "./types.js";

function isoDay(offsetDays: number): string {
  const at = new Date(Date.now() + offsetDays * 86_400_000);
  at.setUTCHours(0, 0, 0, 0);
  return at.toISOString().replace(".000Z", "+00:00");
}

export async function boot(root: HTMLElement): Promise<void> {
  const params = new URLSearchParams(window.location.search);
  const api = new ApiClient(
    params.get("api") ?? "",
    (url, init) => fetch(url, init),
    params.get("token") ?? undefined,
  );
  const state = initialViewState({ from: isoDay(-7), to: isoDay(1) });
  state.selectedClass = params.get("class");
  state.selectedLearner = params.get("learner");

  const overviewEl = root.querySelector<HTMLElement>("#class-overview")!;
  const queueEl = root.querySelector<HTMLElement>("#queue")!;
  const learnerEl = root.querySelector<HTMLElement>("#learner-view")!;

  const queue = new RecommendationQueue(api, () => renderQueue());

  function renderQueue(): void {
    queueEl.innerHTML = queue.items.map(renderQueueCard).join("") || "<p>queue is empty</p>";
  }

  async function loadOverview(): Promise<void> {
    if (!state.selectedClass) return;
    try {
      const data = await api.classIndicators(state.selectedClass, state.window);
      overviewEl.innerHTML = renderClassOverview(data);
    } catch (error) {
      const message = error instanceof ApiRequestError ? error.message : "network problem";
      overviewEl.innerHTML = renderErrorBanner(message, "reload-overview");
    }
  }

  async function loadLearner(): Promise<void> {
    if (!state.selectedLearner || !state.selectedClass) return;
    const view = new LearnerView(api, state.selectedLearner, state.selectedClass, state.peerComparison);
    learnerEl.innerHTML = renderLearnerView(
      await view.load({ from: isoDay(0), to: isoDay(1) }),
    );
  }

  root.addEventListener("click", (event) => {
    const target = event.target as HTMLElement;
    if (target.dataset.action === "reload-overview") void loadOverview();
    const decision = target.dataset.decision as Decision | undefined;
    const id = target.dataset.id;
    if (decision && id) {
      const input =
        decision === "amend"
          ? { consequent: window.prompt("replacement consequent (id:... or attr:k=v)") ?? "" }
          : {};
      void queue.decide(id, decision, input).then(() => loadLearner());
    }
  });

  await loadOverview();
  await queue.load({ state: state.queueFilter });
  renderQueue();
  await loadLearner();
}
