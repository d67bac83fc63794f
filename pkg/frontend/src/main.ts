import { HttpRatingApi } from './api.js';
import { render } from './render.js';
import { RatingSession } from './session.js';
import type { AspectName } from './types.js';

const root = document.getElementById('app');
if (!root) {
  throw new Error('missing #app mount point');
}

const api = new HttpRatingApi('');
const session = new RatingSession(api, (state) => render(root, state, handlers));

const handlers = {
  onBegin: (raterId: string) => void session.begin(raterId),
  onScore: (aspect: AspectName, value: number) => session.setScore(aspect, value),
  onFocusAspect: (aspect: AspectName) => session.setActiveAspect(aspect),
  onSubmit: () => void session.submit(),
  onRetry: () => void session.retry(),
};

document.addEventListener('keydown', (event) => {
  const target = event.target as HTMLElement | null;
  if (target && target.tagName === 'INPUT') {
    return; // typing a rater id, not scoring
  }
  if (event.key >= '1' && event.key <= '5') {
    session.pressKey(event.key);
  } else if (event.key === 'Enter') {
    void session.submit();
  }
});

render(root, session.getState(), handlers);
