#ifndef STM32F1XX_H
#define STM32F1XX_H

#include <stdint.h>

#define __IO volatile

typedef enum
{
  NonMaskableInt_IRQn = -14,
  HardFault_IRQn = -13,
  SysTick_IRQn = -1,
  WWDG_IRQn = 0,
  PVD_IRQn,
  TAMPER_IRQn,
  RTC_IRQn,
  FLASH_IRQn,
  RCC_IRQn,
  EXTI0_IRQn,
  EXTI1_IRQn,
  EXTI2_IRQn,
  EXTI3_IRQn,
  EXTI4_IRQn,
  DMA1_Channel1_IRQn,
  DMA1_Channel2_IRQn,
  DMA1_Channel3_IRQn,
  DMA1_Channel4_IRQn,
  DMA1_Channel5_IRQn,
  DMA1_Channel6_IRQn,
  DMA1_Channel7_IRQn
} IRQn_Type;

typedef struct
{
  __IO uint32_t CCR;
  __IO uint32_t CNDTR;
  __IO uint32_t CPAR;
  __IO uint32_t CMAR;
} DMA_Channel_TypeDef;

typedef struct
{
  __IO uint32_t ISR;
  __IO uint32_t IFCR;
} DMA_TypeDef;

#define PERIPH_BASE           0x40000000UL
#define AHBPERIPH_BASE        (PERIPH_BASE + 0x00020000UL)
#define DMA1_BASE             (AHBPERIPH_BASE + 0x00000000UL)
#define DMA1_Channel1_BASE    (AHBPERIPH_BASE + 0x00000008UL)
#define DMA1_Channel2_BASE    (AHBPERIPH_BASE + 0x0000001CUL)

#define DMA1                ((DMA_TypeDef *)DMA1_BASE)
#define DMA1_Channel1       ((DMA_Channel_TypeDef *)DMA1_Channel1_BASE)
#define DMA1_Channel2       ((DMA_Channel_TypeDef *)DMA1_Channel2_BASE)

#define DMA_ISR_GIF1_Pos    (0U)
#define DMA_ISR_GIF1        (0x1UL << DMA_ISR_GIF1_Pos)
#define DMA_ISR_TCIF1_Pos   (1U)
#define DMA_ISR_TCIF1       (0x1UL << DMA_ISR_TCIF1_Pos)
#define DMA_ISR_HTIF1_Pos   (2U)
#define DMA_ISR_TEIF1_Pos   (3U)
#define DMA_ISR_GIF2_Pos    (4U)
#define DMA_ISR_TCIF2_Pos   (5U)
#define DMA_ISR_HTIF2_Pos   (6U)
#define DMA_ISR_TEIF2_Pos   (7U)

#define DMA_IFCR_CGIF1_Pos  (0U)
#define DMA_IFCR_CTCIF1_Pos (1U)
#define DMA_IFCR_CTCIF1     (0x1UL << DMA_IFCR_CTCIF1_Pos)
#define DMA_IFCR_CHTIF1_Pos (2U)
#define DMA_IFCR_CTEIF1_Pos (3U)
#define DMA_IFCR_CGIF2_Pos  (4U)
#define DMA_IFCR_CTCIF2_Pos (5U)
#define DMA_IFCR_CHTIF2_Pos (6U)
#define DMA_IFCR_CTEIF2_Pos (7U)

#define DMA_CCR_EN_Pos      (0U)
#define DMA_CCR_EN          (0x1UL << DMA_CCR_EN_Pos)
#define DMA_CCR_TCIE_Pos    (1U)
#define DMA_CCR_TCIE        (0x1UL << DMA_CCR_TCIE_Pos)
#define DMA_CCR_HTIE_Pos    (2U)
#define DMA_CCR_TEIE_Pos    (3U)
#define DMA_CCR_DIR_Pos     (4U)
#define DMA_CCR_DIR         (0x1UL << DMA_CCR_DIR_Pos)
#define DMA_CCR_CIRC_Pos    (5U)
#define DMA_CCR_PINC_Pos    (6U)
#define DMA_CCR_MINC_Pos    (7U)
#define DMA_CCR_PSIZE_Pos   (8U)
#define DMA_CCR_PSIZE       (0x3UL << DMA_CCR_PSIZE_Pos)
#define DMA_CCR_MSIZE_Pos   (10U)
#define DMA_CCR_MSIZE       (0x3UL << DMA_CCR_MSIZE_Pos)
#define DMA_CCR_PL_Pos      (12U)
#define DMA_CCR_MEM2MEM_Pos (14U)

#define DMA_MDATAALIGN_BYTE      0x00000000U
#define DMA_MDATAALIGN_HALFWORD  (0x1UL << DMA_CCR_MSIZE_Pos)
#define DMA_MDATAALIGN_WORD      (0x2UL << DMA_CCR_MSIZE_Pos)

#endif
