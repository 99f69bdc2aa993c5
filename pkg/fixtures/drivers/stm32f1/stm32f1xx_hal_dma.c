#include "stm32f1xx.h"

void DMA_SetConfig(DMA_Channel_TypeDef *ch, uint32_t src, uint32_t dst, uint32_t len, uint32_t mem_to_periph)
{
  ch->CCR &= ~DMA_CCR_EN;
  ch->CNDTR = len;
  if (mem_to_periph) {
    ch->CCR |= DMA_CCR_DIR;
    ch->CPAR = dst;
    ch->CMAR = src;
  } else {
    ch->CCR &= ~DMA_CCR_DIR;
    ch->CPAR = src;
    ch->CMAR = dst;
  }
}

void DMA_Start_IT(DMA_Channel_TypeDef *ch)
{
  ch->CCR |= DMA_CCR_TCIE;
  ch->CCR |= DMA_CCR_EN;
}

void DMA1_Channel1_IRQHandler(void)
{
  if (DMA1->ISR & DMA_ISR_TCIF1) {
    DMA1->IFCR = DMA_IFCR_CTCIF1;
    DMA1_Channel1->CCR &= ~DMA_CCR_TCIE;
  }
}
