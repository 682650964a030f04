export { ApiClient, ApiConflictError, ApiRequestError } from "./api.js";
export { renderClassOverview, renderErrorBanner } from "./classOverview.js";
export { renderLinePlot, NO_DATA_HTML } from "./lineplot.js";
export { LearnerView, renderLearnerView } from "./learnerView.js";
export { MAX_RX, MAX_RY, pulseEllipse, renderPulseRow } from "./pulse.js";
export { RecommendationQueue, explainRule, renderQueueCard } from "./queue.js";
export { allowedDecisions, initialViewState, isTerminal } from "./state.js";
export * from "./types.js";
