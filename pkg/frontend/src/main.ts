/** Entry point: wire the flow to #app using query parameters.
 *
 * ?session=SESSION_ID&annotator=ANNOTATOR_ID[&api=http://host:port]
 */

import { AnnotationApi } from './api.js';
import { AnnotationFlow } from './flow.js';
import { renderError } from './view.js';

function start(): void {
  const root = document.getElementById('app');
  if (!root) return;
  const params = new URLSearchParams(window.location.search);
  const sessionId = params.get('session');
  const annotatorId = params.get('annotator');
  const apiBase = params.get('api') ?? '';
  if (!sessionId || !annotatorId) {
    renderError(
      document,
      root,
      'missing ?session= and ?annotator= query parameters',
      null,
    );
    return;
  }
  const api = new AnnotationApi(apiBase);
  const flow = new AnnotationFlow(api, sessionId, annotatorId, root, document);
  void flow.start();
}

start();
