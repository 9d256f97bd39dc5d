/** Backend selection: the wasm backend (pinned to one thread, so runs stay
 * deterministic) is about an order of magnitude faster than the plain-JS
 * cpu backend; fall back to cpu when wasm cannot initialize. */

import * as tf from '@tensorflow/tfjs'
import { setThreadsCount } from '@tensorflow/tfjs-backend-wasm'

let initialized: string | null = null

export async function initBackend(prefer?: string): Promise<string> {
  if (initialized) return initialized
  const choice = prefer ?? process.env.TFJS_BACKEND ?? 'wasm'
  if (choice === 'wasm') {
    try {
      setThreadsCount(1)
      await tf.setBackend('wasm')
      await tf.ready()
      initialized = 'wasm'
      return initialized
    } catch {
      // fall through to cpu
    }
  }
  await tf.setBackend('cpu')
  await tf.ready()
  initialized = tf.getBackend()
  return initialized
}
