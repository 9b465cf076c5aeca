// Health-state labels derived from the HP fraction, mirroring the engine's
// banding rule so cards stay meaningful even before a state refresh lands.

export function healthLabel(currentHp: number, maxHp: number, isPlayer: boolean): string {
  if (currentHp <= 0) {
    return isPlayer ? "Unconscious" : "Dead";
  }
  const fraction = currentHp / maxHp;
  if (fraction <= 0.4) {
    return "HeavilyWounded";
  }
  if (fraction <= 0.75) {
    return "LightlyWounded";
  }
  return "Healthy";
}

export function hpText(currentHp: number, maxHp: number): string {
  return `${currentHp}/${maxHp}`;
}
