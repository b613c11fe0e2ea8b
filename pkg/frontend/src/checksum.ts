// Client-side duplicate of the prescription-code check, used only for
// instant typo feedback at the pharmacist workstation. The server remains
// the authority on whether a code exists and is dispensable.

export const CODE_ALPHABET = '0123456789ABCDEFGHJKMNPQRSTVWXYZ'
export const CODE_LENGTH = 11

const CHAR_VALUE = new Map<string, number>(
  [...CODE_ALPHABET].map((char, value) => [char, value]),
)

/** True iff the code is 11 alphabet characters whose values sum to 0 mod 32. */
export function codeChecksumValid(code: string): boolean {
  if (code.length !== CODE_LENGTH) return false
  let total = 0
  for (const char of code) {
    const value = CHAR_VALUE.get(char)
    if (value === undefined) return false
    total += value
  }
  return total % 32 === 0
}

/** Strip presentation grouping and uppercase what the pharmacist typed. */
export function normalizeCodeInput(raw: string): string {
  return raw.toUpperCase().replace(/[\s-]/g, '')
}

/** Display grouping XXX-XXXX-XXXX for phone dictation; never transmitted. */
export function groupCode(code: string): string {
  if (code.length !== CODE_LENGTH) return code
  return `${code.slice(0, 3)}-${code.slice(3, 7)}-${code.slice(7)}`
}
